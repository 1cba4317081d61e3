#pragma once

#include "eitcem/conformal.hpp"
#include "eitcem/synth.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace eitcem {

/// Error in a configuration file; `key` names the offending section or key.
struct ConfigError : std::invalid_argument {
    ConfigError(const std::string& key, const std::string& what)
        : std::invalid_argument(key + ": " + what), key(key) {}
    std::string key;
};

struct DomainConfig {
    enum class Shape { Square, Disk };
    Shape shape = Shape::Square;
    double half_side = 1.0;            // square
    double radius = 1.0;               // disk (target and reconstruction)
    double sim_edge = 0.035;           // simulation mesh target edge length
    double recon_edge = 0.07;          // reconstruction mesh target edge length
    double electrode_edge_factor = 0.5;
};

struct ElectrodeConfig {
    int count = 12;                    // disk targets; square targets use 4 * offsets
    double width = 0.25;               // square: arc-length width
    std::vector<double> offsets{0.0, 0.5, -0.5};  // square: centers relative to side midpoints
    double half_width = 0.125;         // disk targets: alpha
    double contact_mean = 0.1;
    double contact_std = 0.01;
    std::uint64_t contact_seed = 7;
    std::string current_basis = "reference";  // reference | adjacent
};

struct SolverConfig {
    int max_iterations = 50;
    double relative_tolerance = 1e-6;
    int max_halvings = 8;
    bool joint_contact_init = true;
    double jacobian_edge = 0.25;       // check-jacobians mesh
    double sweep_edge = 0.1;
    double sweep_resolution = 0.125;
    int sweep_max_refinements = 3;
};

struct OutputConfig {
    std::string dir = "out";
    std::string colormap = "viridis";
    int image_size = 800;
};

struct RunConfig {
    DomainConfig domain;
    ElectrodeConfig electrodes;
    Phantom phantom = Phantom::example1();
    NoiseSpec noise;
    std::uint64_t noise_seed = 11;
    PriorSpec prior;                   // e_mean filled from e_half_width / e_offset
    double e_half_width = 0.125;
    double e_offset = 0.0;
    double z_mean = 1.0;
    SolverConfig solver;
    OutputConfig output;
    std::set<std::string> sections;    // sections present in the parsed text

    int electrode_count() const;
    PolygonElectrodeLayout square_layout() const;
    DiskElectrodeLayout disk_layout() const;    // disk targets
    DiskElectrodeLayout prior_layout() const;   // equally spaced prior mean
    CurrentBasis basis() const;
    PriorSpec prior_spec() const;
};

/// Parses and validates. Every section is optional unless listed in `required`.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& required = {});
RunConfig read_config(const std::string& path, const std::vector<std::string>& required = {});

/// Canonical text: every key with its value, in grammar order. parse(serialize(c))
/// reproduces c.
std::string serialize_config(const RunConfig& config);

/// Hex CRC-32 of the canonical text.
std::string config_hash(const RunConfig& config);

/// Defaults listing for --help.
std::string config_reference();

// --- layout and contact files ------------------------------------------------------------

/// `[layout]` with keys r, theta = [..], alpha = [..]; `header` lines are written as comments.
std::string layout_text(const DiskElectrodeLayout& layout, const std::vector<std::string>& header = {});
DiskElectrodeLayout parse_layout(const std::string& text);

/// `[contacts]` with key z = [..].
std::string contacts_text(const Eigen::VectorXd& z, const std::vector<std::string>& header = {});
Eigen::VectorXd parse_contacts(const std::string& text);

/// Whole file as a string; throws ConfigError naming the path when unreadable.
std::string read_text_file(const std::string& path);

}  // namespace eitcem
