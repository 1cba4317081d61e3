#include "eitcem/config.hpp"

#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace eitcem {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (trim(v.substr(used)).empty() && std::isfinite(d)) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError(key, "expected a number, got '" + v + "'");
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long i = std::stoll(v, &used);
        if (trim(v.substr(used)).empty()) return i;
    } catch (const std::exception&) {
    }
    throw ConfigError(key, "expected an integer, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& v, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    if (sep == ' ') {
        while (ss >> item) out.push_back(item);
    } else {
        while (std::getline(ss, item, sep)) out.push_back(trim(item));
    }
    return out;
}

std::string num(double v) { return format_double(v); }

std::string inclusion_text(const Inclusion& inc) {
    std::ostringstream os;
    if (inc.shape == Inclusion::Shape::Disk)
        os << "disk " << num(inc.center.x()) << ' ' << num(inc.center.y()) << ' '
           << num(inc.radius) << ' ' << num(inc.value);
    else
        os << "rect " << num(inc.center.x()) << ' ' << num(inc.center.y()) << ' '
           << num(inc.half_size.x()) << ' ' << num(inc.half_size.y()) << ' ' << num(inc.value);
    return os.str();
}

Inclusion parse_inclusion(const std::string& key, const std::string& v) {
    const auto f = split(v, ' ');
    Inclusion inc;
    if (!f.empty() && f[0] == "disk" && f.size() == 5) {
        inc.shape = Inclusion::Shape::Disk;
        inc.center = Vec2(to_double(key, f[1]), to_double(key, f[2]));
        inc.radius = to_double(key, f[3]);
        inc.value = to_double(key, f[4]);
        return inc;
    }
    if (!f.empty() && f[0] == "rect" && f.size() == 6) {
        inc.shape = Inclusion::Shape::Rectangle;
        inc.center = Vec2(to_double(key, f[1]), to_double(key, f[2]));
        inc.half_size = Vec2(to_double(key, f[3]), to_double(key, f[4]));
        inc.value = to_double(key, f[5]);
        return inc;
    }
    throw ConfigError(key, "expected 'disk cx cy r value' or 'rect cx cy hx hy value'");
}

struct KeySpec {
    std::string section, name, doc;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

#define EITCEM_NUM(sec, nm, field, doc)                                                         \
    KeySpec {                                                                                  \
        sec, nm, doc, [&c](const std::string& v) { c.field = to_double(sec "." nm, v); },      \
            [&c] { return num(c.field); }                                                      \
    }
#define EITCEM_INT(sec, nm, field, doc)                                                         \
    KeySpec {                                                                                  \
        sec, nm, doc,                                                                          \
            [&c](const std::string& v) {                                                       \
                c.field = static_cast<decltype(c.field)>(to_int(sec "." nm, v));               \
            },                                                                                 \
            [&c] { return std::to_string(c.field); }                                           \
    }
#define EITCEM_BOOL(sec, nm, field, doc)                                                        \
    KeySpec {                                                                                  \
        sec, nm, doc, [&c](const std::string& v) { c.field = to_bool(sec "." nm, v); },        \
            [&c] { return std::string(c.field ? "true" : "false"); }                           \
    }
#define EITCEM_STR(sec, nm, field, doc)                                                         \
    KeySpec {                                                                                  \
        sec, nm, doc, [&c](const std::string& v) { c.field = v; }, [&c] { return c.field; }    \
    }

// `inclusion` is handled separately because it repeats.
std::vector<KeySpec> key_table(RunConfig& c) {
    return {
        {"domain", "shape", "square | disk (target domain; reconstructions use the unit disk)",
         [&c](const std::string& v) {
             if (v == "square")
                 c.domain.shape = DomainConfig::Shape::Square;
             else if (v == "disk")
                 c.domain.shape = DomainConfig::Shape::Disk;
             else
                 throw ConfigError("domain.shape", "expected square or disk, got '" + v + "'");
         },
         [&c] { return std::string(c.domain.shape == DomainConfig::Shape::Square ? "square" : "disk"); }},
        EITCEM_NUM("domain", "half_side", domain.half_side, "square half side"),
        EITCEM_NUM("domain", "radius", domain.radius, "disk radius"),
        EITCEM_NUM("domain", "sim_edge", domain.sim_edge, "simulation mesh target edge length"),
        EITCEM_NUM("domain", "recon_edge", domain.recon_edge,
                   "reconstruction mesh target edge length (>= 2 sim_edge)"),
        EITCEM_NUM("domain", "electrode_edge_factor", domain.electrode_edge_factor,
                   "edge length at electrode end points relative to the target"),

        EITCEM_INT("electrodes", "count", electrodes.count, "electrodes on a disk target"),
        EITCEM_NUM("electrodes", "width", electrodes.width, "square: electrode width"),
        {"electrodes", "offsets", "square: centers relative to each side midpoint",
         [&c](const std::string& v) {
             c.electrodes.offsets.clear();
             for (const auto& s : split(v, ','))
                 c.electrodes.offsets.push_back(to_double("electrodes.offsets", s));
         },
         [&c] {
             std::string s;
             for (std::size_t i = 0; i < c.electrodes.offsets.size(); ++i)
                 s += (i ? ", " : "") + num(c.electrodes.offsets[i]);
             return s;
         }},
        EITCEM_NUM("electrodes", "half_width", electrodes.half_width, "disk target: alpha"),
        EITCEM_NUM("electrodes", "contact_mean", electrodes.contact_mean, "contact draw mean"),
        EITCEM_NUM("electrodes", "contact_std", electrodes.contact_std, "contact draw std"),
        EITCEM_INT("electrodes", "contact_seed", electrodes.contact_seed, "contact draw seed"),
        EITCEM_STR("electrodes", "current_basis", electrodes.current_basis, "reference | adjacent"),

        EITCEM_NUM("phantom", "background", phantom.background, "background conductivity"),

        {"noise", "mode", "uniform | per-component",
         [&c](const std::string& v) {
             if (v == "uniform")
                 c.noise.mode = NoiseSpec::Mode::Uniform;
             else if (v == "per-component")
                 c.noise.mode = NoiseSpec::Mode::PerComponent;
             else
                 throw ConfigError("noise.mode", "expected uniform or per-component, got '" + v + "'");
         },
         [&c] {
             return std::string(c.noise.mode == NoiseSpec::Mode::Uniform ? "uniform" : "per-component");
         }},
        EITCEM_NUM("noise", "eta0", noise.eta0, "uniform: std = eta0 * voltage range"),
        EITCEM_NUM("noise", "relative", noise.relative, "per-component: relative level"),
        EITCEM_NUM("noise", "range", noise.range, "per-component: level relative to pattern range"),
        EITCEM_INT("noise", "seed", noise_seed, "noise seed"),

        EITCEM_NUM("priors", "eta1_sq", prior.eta1_sq, "conductivity pointwise variance"),
        EITCEM_NUM("priors", "lambda", prior.lambda, "conductivity correlation length"),
        EITCEM_NUM("priors", "z_mean", z_mean, "contact prior mean (all electrodes)"),
        EITCEM_NUM("priors", "eta2", prior.eta2, "contact prior std"),
        EITCEM_NUM("priors", "e_half_width", e_half_width, "electrode prior mean half-width"),
        EITCEM_NUM("priors", "e_offset", e_offset, "angle of the first prior electrode"),
        EITCEM_NUM("priors", "eta3", prior.eta3, "electrode parameter prior std"),

        EITCEM_INT("solver", "max_iterations", solver.max_iterations, "Gauss-Newton iterations"),
        EITCEM_NUM("solver", "relative_tolerance", solver.relative_tolerance,
                   "stop when the relative decrease of F is below this"),
        EITCEM_INT("solver", "max_halvings", solver.max_halvings, "line-search halvings"),
        EITCEM_BOOL("solver", "joint_contact_init", solver.joint_contact_init,
                    "fit a common contact value with the homogeneous conductivity"),
        EITCEM_NUM("solver", "jacobian_edge", solver.jacobian_edge, "check-jacobians mesh edge"),
        EITCEM_NUM("solver", "sweep_edge", solver.sweep_edge, "conformal-sweep base mesh edge"),
        EITCEM_NUM("solver", "sweep_resolution", solver.sweep_resolution,
                   "conformal-sweep electrode edge relative to its width"),
        EITCEM_INT("solver", "sweep_max_refinements", solver.sweep_max_refinements,
                   "conformal-sweep refinement budget"),

        EITCEM_STR("output", "dir", output.dir, "output directory"),
        EITCEM_STR("output", "colormap", output.colormap, "viridis | gray | coolwarm"),
        EITCEM_INT("output", "image_size", output.image_size, "rendered image size in pixels"),
    };
}

#undef EITCEM_NUM
#undef EITCEM_INT
#undef EITCEM_BOOL
#undef EITCEM_STR

const std::vector<std::string> kSections{"domain", "electrodes", "phantom", "noise",
                                         "priors", "solver",     "output"};

void validate(const RunConfig& c) {
    auto need = [](bool ok, const std::string& key, const std::string& what) {
        if (!ok) throw ConfigError(key, what);
    };
    need(c.domain.half_side > 0, "domain.half_side", "must be positive");
    need(c.domain.radius > 0, "domain.radius", "must be positive");
    need(c.domain.sim_edge > 0, "domain.sim_edge", "must be positive");
    need(c.domain.recon_edge > 0, "domain.recon_edge", "must be positive");
    need(c.domain.sim_edge <= 0.5 * c.domain.recon_edge, "domain.sim_edge",
         "must be at most half of recon_edge (inverse-crime guard)");
    need(c.domain.electrode_edge_factor > 0 && c.domain.electrode_edge_factor <= 1,
         "domain.electrode_edge_factor", "must lie in (0, 1]");
    need(c.electrodes.count >= 2, "electrodes.count", "need at least 2 electrodes");
    need(c.electrodes.width > 0, "electrodes.width", "must be positive");
    need(!c.electrodes.offsets.empty(), "electrodes.offsets", "need at least one offset");
    need(c.electrodes.half_width > 0, "electrodes.half_width", "must be positive");
    need(c.electrodes.contact_mean > 0 && c.electrodes.contact_std >= 0 &&
             c.electrodes.contact_std < c.electrodes.contact_mean / 3,
         "electrodes.contact_std", "need mean > 0 and 0 <= std < mean/3");
    need(c.electrodes.current_basis == "reference" || c.electrodes.current_basis == "adjacent",
         "electrodes.current_basis", "expected reference or adjacent");
    const auto ph = validate_phantom(c.phantom);
    need(ph.ok, "phantom", ph.summary());
    const auto nr = validate_noise_spec(c.noise);
    need(nr.ok, "noise", nr.summary());
    need(c.z_mean > 0, "priors.z_mean", "must be positive");
    need(c.e_half_width > kMinHalfWidth, "priors.e_half_width", "must exceed 1e-3");
    need(c.solver.max_iterations >= 0, "solver.max_iterations", "must be non-negative");
    need(c.solver.relative_tolerance >= 0, "solver.relative_tolerance", "must be non-negative");
    need(c.solver.max_halvings >= 0 && c.solver.max_halvings <= 60, "solver.max_halvings",
         "must lie in [0, 60]");
    need(c.solver.jacobian_edge > 0, "solver.jacobian_edge", "must be positive");
    need(c.solver.sweep_edge > 0, "solver.sweep_edge", "must be positive");
    need(c.solver.sweep_resolution > 0, "solver.sweep_resolution", "must be positive");
    need(c.solver.sweep_max_refinements >= 0, "solver.sweep_max_refinements",
         "must be non-negative");
    need(c.output.image_size >= 16 && c.output.image_size <= 8192, "output.image_size",
         "must lie in [16, 8192]");
    need(!c.output.dir.empty(), "output.dir", "must not be empty");
    const auto ps = validate_prior_spec(c.prior_spec());
    need(ps.ok, "priors", ps.summary());
    if (c.domain.shape == DomainConfig::Shape::Square) {
        const auto lay = validate_polygon_layout(c.square_layout());
        need(lay.ok, "electrodes", lay.summary());
    } else {
        const auto lay = validate_disk_layout(c.disk_layout());
        need(lay.ok, "electrodes", lay.summary());
    }
}

}  // namespace

int RunConfig::electrode_count() const {
    return domain.shape == DomainConfig::Shape::Square
               ? 4 * static_cast<int>(electrodes.offsets.size())
               : electrodes.count;
}

PolygonElectrodeLayout RunConfig::square_layout() const {
    return PolygonElectrodeLayout::square(domain.half_side, electrodes.width, electrodes.offsets);
}

DiskElectrodeLayout RunConfig::disk_layout() const {
    return DiskElectrodeLayout::equally_spaced(electrodes.count, electrodes.half_width,
                                               domain.radius);
}

DiskElectrodeLayout RunConfig::prior_layout() const {
    return DiskElectrodeLayout::equally_spaced(electrode_count(), e_half_width, 1.0, e_offset);
}

CurrentBasis RunConfig::basis() const {
    return electrodes.current_basis == "adjacent" ? CurrentBasis::adjacent(electrode_count())
                                                  : CurrentBasis::reference(electrode_count());
}

PriorSpec RunConfig::prior_spec() const {
    PriorSpec p = prior;
    p.z_mean = Eigen::VectorXd::Constant(electrode_count(), z_mean);
    p.e_mean = prior_layout();
    return p;
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& required) {
    RunConfig c;
    auto table = key_table(c);
    std::string section;
    std::set<std::string> seen_keys;
    bool phantom_reset = false;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (std::find(kSections.begin(), kSections.end(), section) == kSections.end())
                throw ConfigError("[" + section + "]", "unknown section");
            if (c.sections.count(section)) throw ConfigError("[" + section + "]", "repeated section");
            c.sections.insert(section);
            if (section == "phantom" && !phantom_reset) {
                c.phantom.inclusions.clear();
                phantom_reset = true;
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where, "expected 'key = value'");
        if (section.empty()) throw ConfigError(where, "key outside of a section");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        const std::string full = section + "." + key;
        if (value.empty()) throw ConfigError(full, "empty value");
        if (section == "phantom" && key == "inclusion") {
            c.phantom.inclusions.push_back(parse_inclusion(full, value));
            continue;
        }
        auto it = std::find_if(table.begin(), table.end(), [&](const KeySpec& k) {
            return k.section == section && k.name == key;
        });
        if (it == table.end()) throw ConfigError(full, "unknown key");
        if (!seen_keys.insert(full).second) throw ConfigError(full, "repeated key");
        it->set(value);
    }
    for (const auto& r : required)
        if (!c.sections.count(r)) throw ConfigError("[" + r + "]", "missing required section");
    validate(c);
    return c;
}

RunConfig read_config(const std::string& path, const std::vector<std::string>& required) {
    return parse_config(read_text_file(path), required);
}

std::string serialize_config(const RunConfig& config) {
    RunConfig c = config;
    const auto table = key_table(c);
    std::ostringstream os;
    for (const auto& sec : kSections) {
        os << '[' << sec << "]\n";
        for (const auto& k : table)
            if (k.section == sec) os << k.name << " = " << k.get() << '\n';
        if (sec == "phantom")
            for (const auto& inc : c.phantom.inclusions) os << "inclusion = " << inclusion_text(inc) << '\n';
        os << '\n';
    }
    return os.str();
}

std::string config_hash(const RunConfig& config) {
    const std::string text = serialize_config(config);
    const uLong crc = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(text.data()),
                            static_cast<uInt>(text.size()));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
    return buf;
}

std::string config_reference() {
    RunConfig c;
    const auto table = key_table(c);
    std::ostringstream os;
    for (const auto& sec : kSections) {
        os << '[' << sec << "]\n";
        for (const auto& k : table)
            if (k.section == sec) os << "  " << k.name << " = " << k.get() << "    # " << k.doc << '\n';
        if (sec == "phantom") {
            os << "  inclusion = disk cx cy r value | rect cx cy hx hy value    # repeatable; "
                  "later inclusions override earlier ones\n";
            for (const auto& inc : c.phantom.inclusions)
                os << "    default: inclusion = " << inclusion_text(inc) << '\n';
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------------------

namespace {

using SectionMap = std::map<std::string, std::string>;

SectionMap read_section(const std::string& text, const std::string& wanted) {
    SectionMap out;
    std::string section;
    bool found = false;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            found = found || section == wanted;
            continue;
        }
        if (section != wanted) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(wanted, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (!out.emplace(key, trim(line.substr(eq + 1))).second)
            throw ConfigError(wanted + "." + key, "repeated key");
    }
    if (!found) throw ConfigError("[" + wanted + "]", "missing section");
    return out;
}

const std::string& require_key(const SectionMap& m, const std::string& section, const std::string& key) {
    const auto it = m.find(key);
    if (it == m.end()) throw ConfigError(section + "." + key, "missing key");
    return it->second;
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
        throw ConfigError(key, "expected a list '[a, b, ...]'");
    std::vector<double> out;
    const std::string body = trim(v.substr(1, v.size() - 2));
    if (body.empty()) return out;
    for (const auto& s : split(body, ',')) out.push_back(to_double(key, s));
    return out;
}

std::string list_text(const double* v, Eigen::Index n) {
    std::string s = "[";
    for (Eigen::Index i = 0; i < n; ++i) s += (i ? ", " : "") + num(v[i]);
    return s + "]";
}

void write_header(std::ostringstream& os, const std::vector<std::string>& header) {
    for (const auto& h : header) os << "# " << h << '\n';
}

}  // namespace

std::string layout_text(const DiskElectrodeLayout& layout, const std::vector<std::string>& header) {
    std::ostringstream os;
    write_header(os, header);
    os << "[layout]\n"
       << "r = " << num(layout.radius) << '\n'
       << "theta = " << list_text(layout.theta.data(), layout.count()) << '\n'
       << "alpha = " << list_text(layout.alpha.data(), static_cast<Eigen::Index>(layout.alpha.size()))
       << '\n';
    return os.str();
}

DiskElectrodeLayout parse_layout(const std::string& text) {
    const SectionMap m = read_section(text, "layout");
    for (const auto& [k, v] : m)
        if (k != "r" && k != "theta" && k != "alpha") throw ConfigError("layout." + k, "unknown key");
    DiskElectrodeLayout layout;
    layout.radius = to_double("layout.r", require_key(m, "layout", "r"));
    layout.theta = parse_list("layout.theta", require_key(m, "layout", "theta"));
    layout.alpha = parse_list("layout.alpha", require_key(m, "layout", "alpha"));
    const auto report = validate_disk_layout(layout);
    if (!report.ok) throw ConfigError("layout", report.summary());
    return layout;
}

std::string contacts_text(const Eigen::VectorXd& z, const std::vector<std::string>& header) {
    std::ostringstream os;
    write_header(os, header);
    os << "[contacts]\n" << "z = " << list_text(z.data(), z.size()) << '\n';
    return os.str();
}

Eigen::VectorXd parse_contacts(const std::string& text) {
    const SectionMap m = read_section(text, "contacts");
    for (const auto& [k, v] : m)
        if (k != "z") throw ConfigError("contacts." + k, "unknown key");
    const auto z = parse_list("contacts.z", require_key(m, "contacts", "z"));
    if (z.empty()) throw ConfigError("contacts.z", "empty list");
    for (double v : z)
        if (!(v > 0)) throw ConfigError("contacts.z", "contact resistances must be positive");
    return Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError(path, "cannot read file");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace eitcem
