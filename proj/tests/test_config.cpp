#include "eitcem/config.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace eitcem;

namespace {

std::string error_key(const std::string& text, const std::vector<std::string>& required = {}) {
    try {
        parse_config(text, required);
    } catch (const ConfigError& e) {
        return e.key;
    }
    return "";
}

}  // namespace

TEST_CASE("defaults and round trip") {
    const RunConfig d = parse_config("");
    CHECK(d.domain.shape == DomainConfig::Shape::Square);
    CHECK(d.electrode_count() == 12);
    CHECK(d.phantom.inclusions.size() == 2);
    CHECK(d.noise.eta0 == 1e-3);
    CHECK(d.prior.eta1_sq == 0.5);
    CHECK(d.sections.empty());

    const std::string text = R"(
# a comment
[domain]
shape = disk
radius = 1.5      # trailing comment
sim_edge = 0.03
recon_edge = 0.09
[electrodes]
count = 16
half_width = 0.1
current_basis = adjacent
[phantom]
background = 2
inclusion = disk 0.1 0.2 0.3 4
inclusion = rect -0.5 0 0.2 0.1 0.5
[noise]
mode = per-component
relative = 0.02
seed = 99
[priors]
lambda = 0.5
z_mean = 0.3
[solver]
max_iterations = 7
joint_contact_init = false
[output]
colormap = gray
)";
    const RunConfig c = parse_config(text);
    CHECK(c.domain.shape == DomainConfig::Shape::Disk);
    CHECK(c.domain.radius == 1.5);
    CHECK(c.electrode_count() == 16);
    CHECK(c.basis().electrode_count() == 16);
    CHECK(c.phantom.background == 2);
    REQUIRE(c.phantom.inclusions.size() == 2);
    CHECK(c.phantom.inclusions[1].shape == Inclusion::Shape::Rectangle);
    CHECK(c.phantom.inclusions[1].half_size.y() == 0.1);
    CHECK(c.noise.mode == NoiseSpec::Mode::PerComponent);
    CHECK(c.noise_seed == 99);
    CHECK(c.prior_spec().z_mean.size() == 16);
    CHECK(c.prior_spec().z_mean[3] == 0.3);
    CHECK(c.solver.max_iterations == 7);
    CHECK_FALSE(c.solver.joint_contact_init);
    CHECK(c.output.colormap == "gray");
    CHECK(c.sections.count("priors"));

    const std::string canon = serialize_config(c);
    const RunConfig back = parse_config(canon);
    CHECK(serialize_config(back) == canon);
    CHECK(config_hash(back) == config_hash(c));
    CHECK(config_hash(c) != config_hash(d));
    CHECK(config_hash(c).size() == 8);
    // Comments and layout do not change the hash.
    CHECK(config_hash(parse_config("[noise]\n  eta0 = 1e-3  # same\n")) == config_hash(d));
}

TEST_CASE("errors name the offending key") {
    CHECK(error_key("[domain]\nsize = 3\n") == "domain.size");
    CHECK(error_key("[bogus]\n") == "[bogus]");
    CHECK(error_key("[noise]\neta0 = 1\neta0 = 2\n") == "noise.eta0");
    CHECK(error_key("[noise]\n[noise]\n") == "[noise]");
    CHECK(error_key("[domain]\nsim_edge = abc\n") == "domain.sim_edge");
    CHECK(error_key("[solver]\nmax_iterations = 2.5\n") == "solver.max_iterations");
    CHECK(error_key("[solver]\njoint_contact_init = maybe\n") == "solver.joint_contact_init");
    CHECK(error_key("[phantom]\ninclusion = hexagon 1 2 3\n") == "phantom.inclusion");
    CHECK(error_key("[domain]\nshape = circle\n") == "domain.shape");
    CHECK(error_key("[noise]\nmode =\n") == "noise.mode");
    CHECK(error_key("eta0 = 1\n").rfind("line", 0) == 0);
    CHECK(error_key("[domain]\n", {"phantom"}) == "[phantom]");
    CHECK(error_key("[phantom]\nbackground = 1\n", {"phantom"}) == "");
    // Validation failures name the key too.
    CHECK(error_key("[noise]\neta0 = -1\n") != "");
    CHECK(error_key("[domain]\nsim_edge = 0.1\nrecon_edge = 0.15\n") != "");
}

TEST_CASE("phantom section replaces the default inclusions") {
    CHECK(parse_config("[phantom]\nbackground = 1\n").phantom.inclusions.empty());
    const auto c = parse_config("[phantom]\ninclusion = disk 0 0 0.5 3\n");
    REQUIRE(c.phantom.inclusions.size() == 1);
    CHECK(c.phantom.inclusions[0].radius == 0.5);
    CHECK(c.phantom.inclusions[0].value == 3);
}

TEST_CASE("layout and contact files") {
    const auto lay = DiskElectrodeLayout::equally_spaced(5, 0.2, 1.0, 0.3);
    const std::string t = layout_text(lay, {"written by a test"});
    CHECK(t.rfind("# written by a test", 0) == 0);
    const auto back = parse_layout(t);
    CHECK(back.radius == lay.radius);
    CHECK(back.theta == lay.theta);
    CHECK(back.alpha == lay.alpha);
    CHECK_THROWS_AS(parse_layout("[layout]\nr = 1\ntheta = [0, 0.1]\nalpha = [0.2, 0.2]\n"), ConfigError);
    CHECK_THROWS_AS(parse_layout("[layout]\nr = 1\ntheta = [0]\n"), ConfigError);

    const Eigen::VectorXd z = Eigen::Vector3d(0.1, 0.25, 1.0 / 3.0);
    CHECK(parse_contacts(contacts_text(z)) == z);
    CHECK_THROWS_AS(parse_contacts("[contacts]\nz = [0.1, -1]\n"), ConfigError);
    CHECK_THROWS_AS(parse_contacts("[contacts]\nw = [1]\n"), ConfigError);

    const auto path = std::filesystem::temp_directory_path() / "eitcem_test_config.toml";
    { std::ofstream(path) << "[noise]\neta0 = 0.002\n"; }
    CHECK(read_config(path.string()).noise.eta0 == 0.002);
    std::filesystem::remove(path);
    try {
        read_text_file(path.string());
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(e.key == path.string());
    }
}

TEST_CASE("derived geometry") {
    const RunConfig c = parse_config("[electrodes]\nwidth = 0.2\noffsets = 0, 0.4\n[priors]\ne_offset = 0.1\n");
    CHECK(c.electrode_count() == 8);
    CHECK(c.square_layout().count() == 8);
    CHECK(c.square_layout().electrode_width(3) == doctest::Approx(0.2));
    const auto p = c.prior_layout();
    CHECK(p.count() == 8);
    CHECK(p.theta[0] == doctest::Approx(0.1));
    CHECK(config_reference().find("[priors]") != std::string::npos);
}
