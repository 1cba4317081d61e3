#pragma once

#include "eitcem/inverse.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace eitcem {

struct Inclusion {
    enum class Shape { Disk, Rectangle };
    Shape shape = Shape::Disk;
    Vec2 center = Vec2::Zero();
    double radius = 0.0;                 // disk
    Vec2 half_size = Vec2::Zero();       // axis-aligned rectangle
    double value = 1.0;

    bool contains(const Vec2& x) const;
    /// Area inside the domain is not accounted for; this is the raw shape area.
    double area() const;
};

struct Phantom {
    double background = 1.0;
    std::vector<Inclusion> inclusions;  // later entries override earlier ones

    /// Square-target defaults: one conductive disk and one resistive rectangle.
    static Phantom example1();
};

ValidationReport validate_phantom(const Phantom& phantom);

double phantom_value(const Phantom& phantom, const Vec2& x);
Eigen::VectorXd eval_phantom(const Phantom& phantom, const TriMesh& mesh);

/// Standard normal draws from mt19937_64 through Box-Muller on 53-bit uniforms, so the
/// stream is identical on every platform.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}
    double next();

private:
    double uniform();  // in (0, 1)
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// M independent N(mean, std^2) draws; non-positive draws are redrawn.
Eigen::VectorXd draw_contacts(int M, double mean, double std, std::uint64_t seed);

struct InverseCrimeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Throws unless the simulation edge length is at most half the reconstruction one.
void check_inverse_crime(double simulation_edge, double reconstruction_edge);

struct Dataset {
    CurrentBasis basis;
    Eigen::MatrixXd voltages;      // M x patterns
    NoiseSpec noise;
    Eigen::VectorXd noise_std;     // stacked, empty for external data
    Eigen::VectorXd true_contacts; // empty for external data
    std::vector<std::string> header;  // provenance lines, written after '# '
};

struct SimulationRequest {
    const TriMesh* mesh = nullptr;     // simulation mesh
    double simulation_edge = 0.0;      // target edge length used for `mesh`
    double reconstruction_edge = 0.0;  // target edge length of the reconstruction mesh
    Phantom phantom;
    Eigen::VectorXd contacts;
    CurrentBasis basis;
    NoiseSpec noise;
    std::uint64_t seed = 0;
};

Dataset simulate_dataset(const SimulationRequest& request);

std::string dataset_csv(const Dataset& dataset);
void write_dataset(const std::string& path, const Dataset& dataset);
/// Reads `# M=` and `# patterns=` headers and the rows; other comment lines are kept in
/// `header`.
Dataset parse_dataset(const std::string& text);
Dataset read_dataset(const std::string& path);

}  // namespace eitcem
