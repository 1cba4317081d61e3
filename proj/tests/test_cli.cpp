#include "eitcem/config.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace eitcem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

// Runs the CLI with stdout and stderr captured in `dir`.
Run run(const fs::path& dir, const std::string& args) {
    const fs::path log = dir / "cli_output.txt";
    const std::string cmd = "cd '" + dir.string() + "' && '" EITCEM_CLI_PATH "' " + args + " > '" +
                            log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(log.string());
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("eitcem_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kConfig = R"([domain]
sim_edge = 0.06
recon_edge = 0.15
[phantom]
background = 1
inclusion = disk 0.4 0.35 0.3 5
inclusion = rect -0.45 -0.3 0.2 0.3 0.2
)";

// Last row of log.csv as numbers.
std::vector<double> last_log_row(const fs::path& file) {
    std::istringstream in(read_text_file(file.string()));
    std::string line, last;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') last = line;
    std::vector<double> v;
    std::istringstream row(last);
    for (std::string cell; std::getline(row, cell, ',');) v.push_back(std::stod(cell));
    return v;
}

}  // namespace

TEST_CASE("help and usage errors") {
    const auto d = scratch("usage");
    CHECK(run(d, "--help").code == 0);
    const auto help = run(d, "reconstruct --help");
    CHECK(help.code == 0);
    CHECK(help.out.find("[priors]") != std::string::npos);
    CHECK(run(d, "").code == 2);
    CHECK(run(d, "frobnicate").code == 2);
    CHECK(run(d, "reconstruct").code == 2);
    CHECK(run(d, "--version").out.find("0.1.0") != std::string::npos);
}

TEST_CASE("simulate and reconstruct") {
    const auto d = scratch("pipeline");
    write(d / "cfg.toml", kConfig);

    const auto sim = run(d, "simulate --config cfg.toml --seed 5 --out a");
    REQUIRE(sim.code == 0);
    const Dataset ds = read_dataset((d / "a" / "dataset.csv").string());
    CHECK(ds.voltages.rows() == 12);
    CHECK(ds.voltages.cols() == 11);
    for (const char* f : {"truth.vtk", "config.toml", "contacts_true.txt", "contacts_mapped.txt", "layout_mapped.txt"})
        CHECK(fs::exists(d / "a" / f));
    const std::string csv = read_text_file((d / "a" / "dataset.csv").string());
    CHECK(csv.find("# eitcem 0.1.0") != std::string::npos);
    CHECK(csv.find("# config ") != std::string::npos);

    REQUIRE(run(d, "simulate --config cfg.toml --seed 5 --out b").code == 0);
    CHECK(read_text_file((d / "b" / "dataset.csv").string()) == csv);
    REQUIRE(run(d, "simulate --config cfg.toml --seed 6 --out c").code == 0);
    CHECK(read_text_file((d / "c" / "dataset.csv").string()) != csv);

    write(d / "nophantom.toml", "[domain]\nsim_edge = 0.06\n");
    const auto missing = run(d, "simulate --config nophantom.toml --out x");
    CHECK(missing.code == 2);
    CHECK(missing.out.find("[phantom]") != std::string::npos);
    write(d / "crime.toml", "[domain]\nsim_edge = 0.1\nrecon_edge = 0.15\n[phantom]\nbackground = 1\n");
    CHECK(run(d, "simulate --config crime.toml --out x").code == 2);
    CHECK(run(d, "simulate --config absent.toml --out x").code == 2);

    const auto fixed = run(d, "reconstruct --config cfg.toml --data a/dataset.csv --mode fixed --out fixed");
    REQUIRE(fixed.code == 0);
    const auto full = run(d, "reconstruct --config cfg.toml --data a/dataset.csv --mode full --out full");
    REQUIRE(full.code == 0);
    for (const char* f : {"sigma.vtk", "log.csv", "layout_final.txt", "contacts_final.txt"})
        CHECK(fs::exists(d / "full" / f));
    const double misfit_fixed = last_log_row(d / "fixed" / "log.csv").at(2);
    const double misfit_full = last_log_row(d / "full" / "log.csv").at(2);
    CHECK(misfit_full < misfit_fixed);

    const auto fz = run(d, "reconstruct --config cfg.toml --data a/dataset.csv --mode fixed-z "
                           "--contacts a/contacts_mapped.txt --out fz");
    REQUIRE(fz.code == 0);
    const auto found = parse_layout(read_text_file((d / "fz" / "layout_final.txt").string()));
    const auto truth = parse_layout(read_text_file((d / "a" / "layout_mapped.txt").string()));
    REQUIRE(found.count() == truth.count());
    for (int m = 0; m < found.count(); ++m)
        CHECK(std::abs(wrap_angle(found.theta[m] - truth.theta[m])) < 0.15);

    CHECK(run(d, "reconstruct --config cfg.toml --data a/dataset.csv --mode fixed-z --out x").code == 2);
    CHECK(run(d, "reconstruct --config cfg.toml --data a/dataset.csv --mode sideways --out x").code == 2);
    write(d / "m8.toml", "[domain]\nshape = disk\n[electrodes]\ncount = 8\n");
    CHECK(run(d, "reconstruct --config m8.toml --data a/dataset.csv --out x").code == 2);
    write(d / "garbage.csv", "not a dataset\n");
    CHECK(run(d, "reconstruct --data garbage.csv --out x").code == 2);

    SUBCASE("render outputs") {
        REQUIRE(run(d, "render full/sigma.vtk --out s1.png --size 120").code == 0);
        REQUIRE(run(d, "render full/sigma.vtk --out s2.png --size 120").code == 0);
        const std::string png = read_text_file((d / "s1.png").string());
        CHECK(png.substr(1, 3) == "PNG");
        CHECK(png == read_text_file((d / "s2.png").string()));
        CHECK(run(d, "render full/sigma.vtk --out r.png --size 64 --range 0.5:3 --colormap gray").code == 0);
        CHECK(run(d, "render a/dataset.csv --out v.png --size 64").code == 0);
        CHECK(run(d, "render full/sigma.vtk --out r.png --range 3:1").code == 2);
        CHECK(run(d, "render full/sigma.vtk --out r.png --range abc").code == 2);
        CHECK(run(d, "render full/sigma.vtk --out r.png --colormap jet").code == 2);
        write(d / "broken.vtk", "# vtk DataFile Version 3.0\nnonsense\n");
        CHECK(run(d, "render broken.vtk --out r.png").code == 2);
        CHECK(run(d, "render garbage.csv --out r.png").code == 2);
    }
}

TEST_CASE("check-jacobians") {
    const auto d = scratch("jac");
    const auto s = run(d, "check-jacobians --component sigma");
    CHECK(s.code == 0);
    CHECK(s.out.find("component,columns,max_rel_error,tolerance,status") != std::string::npos);
    CHECK(s.out.find("sigma,") != std::string::npos);
    CHECK(run(d, "check-jacobians --component z").code == 0);
    CHECK(run(d, "check-jacobians --component sigma --test-flip-sign").code == 1);
    CHECK(run(d, "check-jacobians --component z --test-flip-sign").code == 1);

    const auto e = run(d, "check-jacobians --component e --tol-e 10");
    CHECK(e.code == 0);
    CHECK(e.out.find("e_column,parameter,rel_error") != std::string::npos);
    int rows = 0;
    std::istringstream in(e.out);
    for (std::string line; std::getline(in, line);)
        if (line.rfind("e_column", 0) != 0 && (line.find(",theta_") != std::string::npos ||
                                                line.find(",alpha_") != std::string::npos))
            ++rows;
    CHECK(rows == 24);
    CHECK(run(d, "check-jacobians --component q").code == 2);
}

TEST_CASE("conformal-sweep") {
    const auto d = scratch("sweep");
    write(d / "cfg.toml", "[solver]\nsweep_edge = 0.2\nsweep_max_refinements = 0\n");
    const auto one = run(d, "conformal-sweep --config cfg.toml --h-list 1 --out one.csv");
    CHECK(one.code == 0);
    CHECK(one.out.find("slope: n/a") != std::string::npos);
    std::istringstream in(read_text_file((d / "one.csv").string()));
    int data_rows = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty() && line[0] != '#' && line.rfind("h,", 0) != 0) ++data_rows;
    CHECK(data_rows == 1);

    const auto id = run(d, "conformal-sweep --config cfg.toml --h-list 1,0.5 --identity --out id.csv");
    CHECK(id.code == 0);
    CHECK(id.out.find("slope: n/a") != std::string::npos);
    CHECK(id.out.find("identity") != std::string::npos);

    CHECK(run(d, "conformal-sweep --config cfg.toml --h-list 0.5,1").code == 2);
    CHECK(run(d, "conformal-sweep --config cfg.toml --h-list 1,x").code == 2);
    write(d / "disk.toml", "[domain]\nshape = disk\n");
    CHECK(run(d, "conformal-sweep --config disk.toml --h-list 1").code == 2);
}
