// eitcem: simulate, reconstruct, check-jacobians, conformal-sweep, render.
//
// Exit codes: 0 success, 1 tolerance breach, 2 input error, 3 solver error.

#include "eitcem/config.hpp"
#include "eitcem/conformal.hpp"
#include "eitcem/inverse.hpp"
#include "eitcem/render.hpp"
#include "eitcem/synth.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef EITCEM_VERSION
#define EITCEM_VERSION "0.0.0"
#endif

using namespace eitcem;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kBreach = 1, kInput = 2, kSolver = 3 };

// Input problems that are not config errors (missing files, bad flag values).
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

std::vector<std::string> provenance(const RunConfig& cfg, const std::string& command) {
    return {"eitcem " EITCEM_VERSION, "config " + config_hash(cfg), "command " + command};
}

std::string vtk_title(const RunConfig& cfg, const std::string& what) {
    return "eitcem " EITCEM_VERSION " config " + config_hash(cfg) + " " + what;
}

std::string with_header(const std::vector<std::string>& header, const std::string& body) {
    std::string out;
    for (const auto& h : header) out += "# " + h + "\n";
    return out + body;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path.string());
    f << text;
}

fs::path prepare_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());
    return fs::path(dir);
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& required = {}) {
    if (path.empty()) {
        if (!required.empty()) throw ConfigError("[" + required.front() + "]", "missing required section");
        return RunConfig{};
    }
    return read_config(path, required);
}

Eigen::VectorXd stacked(const Eigen::MatrixXd& U) {
    return Eigen::Map<const Eigen::VectorXd>(U.data(), U.size());
}

// Smooth, strictly positive test conductivity for the Jacobian gate.
double jacobian_sigma(const Vec2& x) { return 1.0 + 0.5 * x.x() - 0.3 * x.y() * x.y(); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    return buf;
}

// --- simulate --------------------------------------------------------------------------

struct SimulateArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a) {
    RunConfig cfg = load_config(a.config, {"phantom"});
    if (a.seed) cfg.noise_seed = *a.seed;
    const fs::path dir = prepare_dir(a.out.empty() ? cfg.output.dir : a.out);
    const auto header = provenance(cfg, "simulate");
    const int M = cfg.electrode_count();
    const RefinementSpec spec{cfg.domain.sim_edge, cfg.domain.electrode_edge_factor};
    const bool square = cfg.domain.shape == DomainConfig::Shape::Square;

    DiskElectrodeLayout disk = cfg.disk_layout();
    const TriMesh mesh = square ? build_polygon_mesh(cfg.square_layout(), spec) : build_disk_mesh(disk, spec);
    const Eigen::VectorXd contacts = draw_contacts(M, cfg.electrodes.contact_mean,
                                                   cfg.electrodes.contact_std, cfg.electrodes.contact_seed);

    SimulationRequest req;
    req.mesh = &mesh;
    req.simulation_edge = cfg.domain.sim_edge;
    req.reconstruction_edge = cfg.domain.recon_edge;
    req.phantom = cfg.phantom;
    req.contacts = contacts;
    req.basis = cfg.basis();
    req.noise = cfg.noise;
    req.seed = cfg.noise_seed;
    Dataset ds = simulate_dataset(req);
    ds.header = header;

    // Disk-model counterparts for reconstructions on the unit disk.
    DiskElectrodeLayout mapped_layout;
    Eigen::VectorXd mapped_z;
    if (square) {
        const Phantom ph = cfg.phantom;
        const auto pf = pushforward_model(cfg.square_layout(), [ph](const Vec2& x) { return phantom_value(ph, x); },
                                          contacts);
        mapped_layout = pf.layout;
        mapped_z = pf.z;
    } else {
        // x -> x / R scales contact resistances by 1 / R.
        mapped_layout = disk;
        mapped_layout.radius = 1.0;
        mapped_z = contacts / cfg.domain.radius;
    }

    write_dataset((dir / "dataset.csv").string(), ds);
    write_vtk_file((dir / "truth.vtk").string(), mesh, {{"sigma", eval_phantom(cfg.phantom, mesh)}},
                   vtk_title(cfg, "truth"));
    write_text(dir / "config.toml", with_header(header, serialize_config(cfg)));
    write_text(dir / "contacts_true.txt", contacts_text(contacts, header));
    write_text(dir / "contacts_mapped.txt", contacts_text(mapped_z, header));
    write_text(dir / "layout_mapped.txt", layout_text(mapped_layout, header));

    std::cout << "M=" << M << " patterns=" << ds.basis.pattern_count() << " nodes=" << mesh.node_count()
              << " config=" << config_hash(cfg) << "\n"
              << "wrote " << dir.string() << "/{dataset.csv,truth.vtk,config.toml,contacts_true.txt,"
              << "contacts_mapped.txt,layout_mapped.txt}\n";
    return kOk;
}

// --- reconstruct -----------------------------------------------------------------------

struct ReconstructArgs {
    std::string config, data, mode = "full", contacts, layout, out;
};

int cmd_reconstruct(const ReconstructArgs& a) {
    const RunConfig cfg = load_config(a.config);
    ReconstructionMode mode;
    try {
        mode = parse_reconstruction_mode(a.mode);
    } catch (const std::exception&) {
        throw InputError("--mode must be fixed, full or fixed-z, got '" + a.mode + "'");
    }
    const Dataset ds = read_dataset(a.data);
    const int M = static_cast<int>(ds.voltages.rows());
    if (M != cfg.electrode_count())
        throw ConfigError("electrodes", "config describes " + std::to_string(cfg.electrode_count()) +
                                            " electrodes but the data has " + std::to_string(M));

    ReconstructionSetup setup;
    setup.mode = mode;
    setup.mesh_spec = {cfg.domain.recon_edge, cfg.domain.electrode_edge_factor};
    setup.basis = ds.basis;
    setup.data = stacked(ds.voltages);
    setup.noise_std = noise_std(cfg.noise, ds.voltages);
    setup.prior = cfg.prior_spec();
    setup.max_iterations = cfg.solver.max_iterations;
    setup.relative_tolerance = cfg.solver.relative_tolerance;
    setup.max_halvings = cfg.solver.max_halvings;
    setup.joint_contact_init = cfg.solver.joint_contact_init;
    if (mode == ReconstructionMode::FixedZ) {
        if (a.contacts.empty()) throw InputError("--mode fixed-z needs --contacts");
        setup.z_fixed = parse_contacts(read_text_file(a.contacts));
        if (setup.z_fixed.size() != M) throw ConfigError("contacts.z", "expected " + std::to_string(M) + " values");
    } else if (!a.contacts.empty()) {
        throw InputError("--contacts is only used with --mode fixed-z");
    }
    if (!a.layout.empty()) {
        if (mode != ReconstructionMode::Fixed) throw InputError("--layout is only used with --mode fixed");
        setup.layout_fixed = parse_layout(read_text_file(a.layout));
        if (setup.layout_fixed->count() != M) throw ConfigError("layout", "expected " + std::to_string(M) + " electrodes");
    }

    const fs::path dir = prepare_dir(a.out.empty() ? cfg.output.dir : a.out);
    MapProblem problem(setup);
    const ReconstructionResult r = problem.run([](const IterationRecord& rec) {
        std::cout << "iter " << rec.iteration << " F=" << format_double(rec.F.total())
                  << " data=" << format_double(rec.F.data) << " q=" << format_double(rec.q) << "\n";
    });

    auto header = provenance(cfg, "reconstruct --mode " + to_string(mode));
    const std::string status = r.failed_at_start ? "failed_at_start" : "ok";
    header.push_back("status " + status);
    header.push_back("stop " + r.stop_reason);
    header.push_back("tau " + format_double(r.tau));

    write_vtk_file((dir / "sigma.vtk").string(), problem.reference_mesh(), {{"sigma", r.state.sigma}},
                   vtk_title(cfg, "sigma " + to_string(mode) + " " + status));
    write_text(dir / "log.csv", with_header(header, iteration_log_csv(r.log)));
    write_text(dir / "layout_final.txt", layout_text(r.state.layout, header));
    write_text(dir / "contacts_final.txt", contacts_text(r.state.z, header));

    std::cout << "mode=" << to_string(mode) << " tau=" << format_double(r.tau)
              << " F=" << format_double(r.state.F.total()) << " data=" << format_double(r.state.F.data)
              << " iterations=" << r.log.size() - 1 << " stop=" << r.stop_reason << " status=" << status << "\n";
    if (r.failed_at_start) {
        std::cerr << "error: line search failed at the first iteration; outputs are flagged\n";
        return kSolver;
    }
    return kOk;
}

// --- check-jacobians -------------------------------------------------------------------

struct JacobianArgs {
    std::string config, component = "all";
    double tol_sigma = 1e-4, tol_z = 1e-5, tol_e = 1e-3;
    bool flip_sign = false;
};

int cmd_check_jacobians(const JacobianArgs& a) {
    const RunConfig cfg = load_config(a.config);
    const int M = cfg.electrodes.count;
    JacobianCheckSetup s;
    s.layout = DiskElectrodeLayout::equally_spaced(M, cfg.electrodes.half_width, 1.0, 0.1);
    s.mesh_spec = {cfg.solver.jacobian_edge, cfg.domain.electrode_edge_factor};
    s.sigma = jacobian_sigma;
    s.z = draw_contacts(M, cfg.electrodes.contact_mean, cfg.electrodes.contact_std, cfg.electrodes.contact_seed);
    s.basis = CurrentBasis::reference(M);
    s.check_sigma = a.component == "sigma" || a.component == "all";
    s.check_contact = a.component == "z" || a.component == "all";
    s.check_electrode = a.component == "e" || a.component == "all";
    s.flip_sign = a.flip_sign;
    const JacobianCheckResult r = check_jacobians(s);

    std::cout << "nodes=" << r.nodes << " M=" << M << " config=" << config_hash(cfg) << "\n";
    std::cout << "component,columns,max_rel_error,tolerance,status\n";
    bool ok = true;
    auto row = [&](const char* name, const Eigen::VectorXd& cols, double tol) {
        if (cols.size() == 0) return;
        const double worst = cols.maxCoeff();
        const bool pass = worst <= tol;
        ok = ok && pass;
        std::cout << name << ',' << cols.size() << ',' << fmt(worst) << ',' << fmt(tol) << ','
                  << (pass ? "PASS" : "FAIL") << "\n";
    };
    row("sigma", r.sigma_columns, a.tol_sigma);
    row("z", r.z_columns, a.tol_z);
    row("e", r.e_columns, a.tol_e);
    if (r.e_columns.size()) {
        std::cout << "e_column,parameter,rel_error\n";
        for (Eigen::Index c = 0; c < r.e_columns.size(); ++c)
            std::cout << c + 1 << ',' << (c < M ? "theta_" : "alpha_") << (c % M) + 1 << ','
                      << fmt(r.e_columns[c]) << "\n";
    }
    return ok ? kOk : kBreach;
}

// --- conformal-sweep -------------------------------------------------------------------

struct SweepArgs {
    std::string config, h_list = "1,0.5,0.25,0.125", out;
    bool identity = false;
};

std::vector<double> parse_h_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || !(v > 0 && v <= 1)) throw InputError("--h-list entries must lie in (0, 1], got '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw InputError("--h-list is empty");
    return out;
}

int cmd_conformal_sweep(const SweepArgs& a) {
    const RunConfig cfg = load_config(a.config);
    if (cfg.domain.shape != DomainConfig::Shape::Square)
        throw ConfigError("domain.shape", "conformal-sweep needs a square target");
    const auto h_list = parse_h_list(a.h_list);
    const int M = cfg.electrode_count();
    const Phantom ph = cfg.phantom;
    SweepOptions opt;
    opt.mesh_spec = {cfg.solver.sweep_edge, cfg.domain.electrode_edge_factor};
    opt.electrode_resolution = cfg.solver.sweep_resolution;
    opt.max_refinements = cfg.solver.sweep_max_refinements;
    opt.identity = a.identity;
    const Eigen::VectorXd z = draw_contacts(M, cfg.electrodes.contact_mean, cfg.electrodes.contact_std,
                                            cfg.electrodes.contact_seed);
    const SweepResult r = h_sweep(cfg.square_layout(), [ph](const Vec2& x) { return phantom_value(ph, x); }, z,
                                  cfg.basis(), h_list, opt);

    auto header = provenance(cfg, std::string("conformal-sweep") + (a.identity ? " --identity" : ""));
    const std::string csv = sweep_csv(r);
    const fs::path path = a.out.empty() ? prepare_dir(cfg.output.dir) / "sweep.csv" : fs::path(a.out);
    if (path.has_parent_path()) prepare_dir(path.parent_path().string());
    write_text(path, with_header(header, csv));

    std::cout << csv;
    if (std::isnan(r.slope))
        std::cout << "slope: n/a\n";
    else
        std::cout << "slope: " << format_double(r.slope) << "\n";
    std::cout << "discretization_ratio: " << format_double(r.discretization_ratio)
              << (r.discretization_ok ? " (ok)" : " (above limit)") << "\n";
    if (!r.notice.empty()) std::cout << "notice: " << r.notice << "\n";
    return kOk;
}

// --- render ----------------------------------------------------------------------------

struct RenderArgs {
    std::string config, input, out, range = "auto", colormap, field;
    int size = 0;
};

std::optional<std::pair<double, double>> parse_range(const std::string& text) {
    if (text == "auto") return std::nullopt;
    const auto colon = text.find(':');
    try {
        if (colon != std::string::npos) {
            std::size_t u1 = 0, u2 = 0;
            const std::string lo = text.substr(0, colon), hi = text.substr(colon + 1);
            const double a = std::stod(lo, &u1), b = std::stod(hi, &u2);
            if (u1 == lo.size() && u2 == hi.size() && a < b) return std::make_pair(a, b);
        }
    } catch (const std::exception&) {
    }
    throw InputError("--range must be 'auto' or 'min:max' with min < max, got '" + text + "'");
}

int cmd_render(const RenderArgs& a) {
    const RunConfig cfg = load_config(a.config);
    RenderOptions opt;
    opt.size = a.size > 0 ? a.size : cfg.output.image_size;
    opt.colormap = a.colormap.empty() ? cfg.output.colormap : a.colormap;
    if (!known_colormap(opt.colormap)) throw InputError("unknown colormap '" + opt.colormap + "'");
    opt.range = parse_range(a.range);

    const std::string text = read_text_file(a.input);
    std::vector<std::pair<std::string, std::string>> meta{{"Software", "eitcem " EITCEM_VERSION}};
    Image img;
    if (text.rfind("# vtk", 0) == 0) {
        VtkData vtk;
        try {
            vtk = parse_vtk(text);
        } catch (const std::runtime_error& e) {
            throw InputError(a.input + ": " + e.what());
        }
        if (vtk.fields.empty()) throw InputError(a.input + ": no point field");
        const NamedField* f = &vtk.fields.front();
        if (!a.field.empty()) {
            f = nullptr;
            for (const auto& nf : vtk.fields)
                if (nf.first == a.field) f = &nf;
            if (!f) throw InputError(a.input + ": no field '" + a.field + "'");
        }
        img = render_field(vtk.mesh, f->second, opt);
        meta.push_back({"Title", vtk.title});
        meta.push_back({"Field", f->first});
    } else {
        const Dataset ds = parse_dataset(text);
        img = render_matrix(ds.voltages, opt);
        for (const auto& h : ds.header) meta.push_back({"Comment", h});
    }
    const fs::path out(a.out);
    if (out.has_parent_path()) prepare_dir(out.parent_path().string());
    write_png(out.string(), img, meta);
    std::cout << "wrote " << out.string() << " (" << img.width << "x" << img.height << ")\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Complete electrode model EIT: simulation, reconstruction and checks"};
    app.set_version_flag("--version", std::string(EITCEM_VERSION));
    app.footer("Exit codes: 0 success, 1 tolerance breach, 2 input error, 3 solver error.\n\n"
               "Config file (INI style; every key optional, defaults shown):\n" +
               config_reference());
    app.require_subcommand(1);

    SimulateArgs sim;
    std::uint64_t seed = 0;
    auto* s = app.add_subcommand("simulate", "Simulate a noisy dataset from a config with a [phantom] section");
    s->add_option("--config", sim.config, "config file")->required();
    auto* seed_opt = s->add_option("--seed", seed, "noise seed (overrides [noise] seed)");
    s->add_option("--out", sim.out, "output directory (default: [output] dir)");

    ReconstructArgs rec;
    auto* r = app.add_subcommand("reconstruct", "Gauss-Newton MAP reconstruction on the unit disk");
    r->add_option("--config", rec.config, "config file (default: built-in defaults)");
    r->add_option("--data", rec.data, "dataset CSV")->required();
    r->add_option("--mode", rec.mode, "fixed | full | fixed-z")->capture_default_str();
    r->add_option("--contacts", rec.contacts, "contact file for fixed-z");
    r->add_option("--layout", rec.layout, "electrode layout file for fixed (default: prior mean)");
    r->add_option("--out", rec.out, "output directory (default: [output] dir)");

    JacobianArgs jac;
    auto* j = app.add_subcommand("check-jacobians", "Compare analytic Jacobians with central differences");
    j->add_option("--config", jac.config, "config file (default: built-in defaults)");
    j->add_option("--component", jac.component, "sigma | z | e | all")
        ->check(CLI::IsMember({"sigma", "z", "e", "all"}))
        ->capture_default_str();
    j->add_option("--tol-sigma", jac.tol_sigma, "tolerance for J_sigma")->capture_default_str();
    j->add_option("--tol-z", jac.tol_z, "tolerance for J_z")->capture_default_str();
    j->add_option("--tol-e", jac.tol_e, "tolerance for J_e")->capture_default_str();
    j->add_flag("--test-flip-sign", jac.flip_sign, "negate the analytic blocks")->group("");

    SweepArgs sw;
    auto* c = app.add_subcommand("conformal-sweep", "Square-to-disk discrepancy for shrinking electrodes");
    c->add_option("--config", sw.config, "config file (default: built-in defaults)");
    c->add_option("--h-list", sw.h_list, "comma-separated electrode scale factors in (0, 1]")->capture_default_str();
    c->add_flag("--identity", sw.identity, "compare the disk model with itself");
    c->add_option("--out", sw.out, "CSV path (default: <[output] dir>/sweep.csv)");

    RenderArgs ren;
    auto* p = app.add_subcommand("render", "Render a VTK field or a dataset to PNG");
    p->add_option("input", ren.input, "VTK file or dataset CSV")->required();
    p->add_option("--out", ren.out, "PNG path")->required();
    p->add_option("--range", ren.range, "auto | min:max")->capture_default_str();
    p->add_option("--colormap", ren.colormap, "viridis | gray | coolwarm (default: [output] colormap)");
    p->add_option("--field", ren.field, "VTK point field (default: first)");
    p->add_option("--size", ren.size, "image size in pixels (default: [output] image_size)");
    p->add_option("--config", ren.config, "config file (default: built-in defaults)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInput;
    }

    try {
        if (s->parsed()) {
            if (seed_opt->count()) sim.seed = seed;
            return cmd_simulate(sim);
        }
        if (r->parsed()) return cmd_reconstruct(rec);
        if (j->parsed()) return cmd_check_jacobians(jac);
        if (c->parsed()) return cmd_conformal_sweep(sw);
        if (p->parsed()) return cmd_render(ren);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kInput;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kInput;
    } catch (const InverseCrimeError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kInput;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kSolver;
    } catch (const MeshError& e) {
        std::cerr << "mesh error: " << e.what() << "\n";
        return kSolver;
    } catch (const ConformalError& e) {
        std::cerr << "conformal map error: " << e.what() << "\n";
        return kSolver;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSolver;
    }
    return kInput;
}
