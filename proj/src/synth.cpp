#include "eitcem/synth.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace eitcem {

bool Inclusion::contains(const Vec2& x) const {
    if (shape == Shape::Disk) return (x - center).squaredNorm() <= radius * radius;
    const Vec2 d = (x - center).cwiseAbs();
    return d.x() <= half_size.x() && d.y() <= half_size.y();
}

double Inclusion::area() const {
    if (shape == Shape::Disk) return kPi * radius * radius;
    return 4.0 * half_size.x() * half_size.y();
}

Phantom Phantom::example1() {
    Phantom p;
    p.background = 1.0;
    Inclusion conductive;
    conductive.shape = Inclusion::Shape::Disk;
    conductive.center = Vec2(0.4, 0.35);
    conductive.radius = 0.3;
    conductive.value = 5.0;
    Inclusion resistive;
    resistive.shape = Inclusion::Shape::Rectangle;
    resistive.center = Vec2(-0.45, -0.3);
    resistive.half_size = Vec2(0.2, 0.3);
    resistive.value = 0.2;
    p.inclusions = {conductive, resistive};
    return p;
}

ValidationReport validate_phantom(const Phantom& phantom) {
    ValidationReport rep;
    if (!(phantom.background >= kMinConductivity)) rep.fail("background below minimum conductivity");
    for (std::size_t i = 0; i < phantom.inclusions.size(); ++i) {
        const auto& inc = phantom.inclusions[i];
        const std::string tag = "inclusion " + std::to_string(i + 1);
        if (!(inc.value >= kMinConductivity)) rep.fail(tag + ": value below minimum conductivity");
        if (inc.shape == Inclusion::Shape::Disk && !(inc.radius > 0.0))
            rep.fail(tag + ": radius must be positive");
        if (inc.shape == Inclusion::Shape::Rectangle &&
            !(inc.half_size.x() > 0.0 && inc.half_size.y() > 0.0))
            rep.fail(tag + ": half sizes must be positive");
        if (!inc.center.allFinite()) rep.fail(tag + ": non-finite center");
    }
    return rep;
}

double phantom_value(const Phantom& phantom, const Vec2& x) {
    double v = phantom.background;
    for (const auto& inc : phantom.inclusions)
        if (inc.contains(x)) v = inc.value;
    return v;
}

Eigen::VectorXd eval_phantom(const Phantom& phantom, const TriMesh& mesh) {
    Eigen::VectorXd s(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i) s[i] = phantom_value(phantom, mesh.nodes[i]);
    return s;
}

// ---------------------------------------------------------------------------------------

double NormalSampler::uniform() {
    for (;;) {
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        if (u > 0.0) return u;
    }
}

double NormalSampler::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double t = kTwoPi * uniform();
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
}

Eigen::VectorXd draw_contacts(int M, double mean, double std, std::uint64_t seed) {
    if (M < 1) throw std::invalid_argument("need at least one electrode");
    if (!(mean > 0.0) || !(std >= 0.0) || !(std < mean / 3.0))
        throw std::invalid_argument("contact distribution needs mean > 0 and std < mean/3");
    NormalSampler rng(seed);
    Eigen::VectorXd z(M);
    for (int m = 0; m < M; ++m) {
        double v;
        do v = mean + std * rng.next();
        while (!(v > 0.0));
        z[m] = v;
    }
    return z;
}

void check_inverse_crime(double simulation_edge, double reconstruction_edge) {
    if (!(simulation_edge > 0.0 && reconstruction_edge > 0.0))
        throw std::invalid_argument("edge lengths must be positive");
    if (simulation_edge > 0.5 * reconstruction_edge) {
        std::ostringstream os;
        os << "inverse-crime guard: simulation target_edge_length " << simulation_edge
           << " must be at most half the reconstruction value " << reconstruction_edge;
        throw InverseCrimeError(os.str());
    }
}

Dataset simulate_dataset(const SimulationRequest& req) {
    if (!req.mesh) throw std::invalid_argument("simulation mesh missing");
    check_inverse_crime(req.simulation_edge, req.reconstruction_edge);
    const auto pr = validate_phantom(req.phantom);
    if (!pr.ok) throw std::invalid_argument("invalid phantom: " + pr.summary());
    const auto nr = validate_noise_spec(req.noise);
    if (!nr.ok) throw std::invalid_argument("invalid noise spec: " + nr.summary());

    const CemSystem system(*req.mesh, eval_phantom(req.phantom, *req.mesh), req.contacts);
    const ForwardSolution sol = system.solve(req.basis);

    Dataset ds;
    ds.basis = req.basis;
    ds.noise = req.noise;
    ds.true_contacts = req.contacts;
    ds.noise_std = noise_std(req.noise, sol.U);
    ds.voltages = sol.U;
    NormalSampler rng(req.seed);
    const Eigen::Index M = sol.U.rows();
    for (Eigen::Index j = 0; j < sol.U.cols(); ++j)
        for (Eigen::Index m = 0; m < M; ++m) {
            const double sd = ds.noise_std[j * M + m];
            const double n = rng.next();
            if (sd > 0.0) ds.voltages(m, j) += sd * n;
        }
    return ds;
}

// ---------------------------------------------------------------------------------------

std::string dataset_csv(const Dataset& ds) {
    const Eigen::Index M = ds.voltages.rows(), J = ds.voltages.cols();
    if (ds.basis.patterns.rows() != M || ds.basis.patterns.cols() != J)
        throw std::invalid_argument("currents and voltages differ in shape");
    std::ostringstream os;
    for (const auto& h : ds.header) os << "# " << h << '\n';
    os << "# M=" << M << '\n' << "# patterns=" << J << '\n';
    for (Eigen::Index j = 0; j < J; ++j) {
        for (Eigen::Index m = 0; m < M; ++m) os << (m ? "," : "") << format_double(ds.basis.patterns(m, j));
        for (Eigen::Index m = 0; m < M; ++m) os << ',' << format_double(ds.voltages(m, j));
        os << '\n';
    }
    return os.str();
}

void write_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << dataset_csv(ds);
}

Dataset parse_dataset(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int M = -1, J = -1, lineno = 0;
    std::vector<std::vector<double>> rows;
    Dataset ds;
    auto fail = [&](const std::string& what) {
        throw std::invalid_argument("dataset line " + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string body = line.substr(1);
            body.erase(0, body.find_first_not_of(' '));
            try {
                if (body.rfind("M=", 0) == 0)
                    M = std::stoi(body.substr(2));
                else if (body.rfind("patterns=", 0) == 0)
                    J = std::stoi(body.substr(9));
                else
                    ds.header.push_back(body);
            } catch (const std::exception&) {
                fail("malformed header");
            }
            continue;
        }
        if (M <= 0) fail("data before '# M=' header");
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t", used) != std::string::npos) fail("bad number");
            } catch (const std::invalid_argument&) {
                fail("bad number '" + cell + "'");
            } catch (const std::out_of_range&) {
                fail("number out of range");
            }
        }
        if (static_cast<int>(row.size()) != 2 * M)
            fail("expected " + std::to_string(2 * M) + " values, got " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (M < 2) throw std::invalid_argument("dataset: missing or invalid '# M=' header");
    if (J >= 0 && J != static_cast<int>(rows.size()))
        throw std::invalid_argument("dataset: '# patterns=' disagrees with the row count");
    J = static_cast<int>(rows.size());
    if (J < 1) throw std::invalid_argument("dataset: no pattern rows");
    ds.basis.patterns.resize(M, J);
    ds.voltages.resize(M, J);
    for (int j = 0; j < J; ++j)
        for (int m = 0; m < M; ++m) {
            ds.basis.patterns(m, j) = rows[j][m];
            ds.voltages(m, j) = rows[j][M + m];
        }
    return ds;
}

Dataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::invalid_argument("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_dataset(ss.str());
}

}  // namespace eitcem
