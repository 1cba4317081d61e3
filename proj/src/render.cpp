#include "eitcem/render.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace eitcem {

Rgb Image::at(int x, int y) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

void Image::set(int x, int y, Rgb c) {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    rgb[i] = c.r;
    rgb[i + 1] = c.g;
    rgb[i + 2] = c.b;
}

namespace {

struct Anchor {
    double t;
    Rgb c;
};

// Sampled from matplotlib's viridis and Moreland's coolwarm.
const std::vector<Anchor> kViridis{
    {0.0, {68, 1, 84}},      {0.125, {71, 44, 122}},  {0.25, {59, 81, 139}},
    {0.375, {44, 113, 142}}, {0.5, {33, 144, 141}},   {0.625, {39, 173, 129}},
    {0.75, {92, 200, 99}},   {0.875, {170, 220, 50}}, {1.0, {253, 231, 37}}};
const std::vector<Anchor> kCoolwarm{
    {0.0, {59, 76, 192}}, {0.25, {141, 176, 254}}, {0.5, {221, 221, 221}},
    {0.75, {244, 154, 123}}, {1.0, {180, 4, 38}}};
const std::vector<Anchor> kGray{{0.0, {0, 0, 0}}, {1.0, {255, 255, 255}}};

const std::vector<Anchor>* lookup(const std::string& name) {
    if (name == "viridis") return &kViridis;
    if (name == "coolwarm") return &kCoolwarm;
    if (name == "gray") return &kGray;
    return nullptr;
}

std::uint8_t lerp8(std::uint8_t a, std::uint8_t b, double s) {
    return static_cast<std::uint8_t>(std::lround(a + s * (static_cast<double>(b) - a)));
}

std::pair<double, double> value_range(const Eigen::MatrixXd& v, const RenderOptions& opt) {
    if (opt.range) {
        if (!(opt.range->second > opt.range->first))
            throw std::invalid_argument("render range must satisfy min < max");
        return *opt.range;
    }
    if (v.size() == 0) return {0.0, 1.0};
    return {v.minCoeff(), v.maxCoeff()};
}

double normalize(double v, std::pair<double, double> r) {
    if (!(r.second > r.first)) return 0.5;
    return (v - r.first) / (r.second - r.first);
}

void stamp_disc(Image& img, double cx, double cy, double radius, Rgb c) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            if (dx * dx + dy * dy <= radius * radius) img.set(x, y, c);
        }
}

void append_chunk(std::string& out, const char* type, const std::string& data) {
    const std::uint32_t n = static_cast<std::uint32_t>(data.size());
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((n >> s) & 0xff));
    std::string body(type, 4);
    body += data;
    out += body;
    const uLong crc = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(body.data()),
                            static_cast<uInt>(body.size()));
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((crc >> s) & 0xff));
}

}  // namespace

bool known_colormap(const std::string& name) { return lookup(name) != nullptr; }

Rgb colormap(const std::string& name, double t) {
    const auto* lut = lookup(name);
    if (!lut) throw std::invalid_argument("unknown colormap '" + name + "'");
    if (!std::isfinite(t)) t = 0.0;
    t = std::clamp(t, 0.0, 1.0);
    for (std::size_t i = 1; i < lut->size(); ++i) {
        const auto& a = (*lut)[i - 1];
        const auto& b = (*lut)[i];
        if (t <= b.t) {
            const double s = (t - a.t) / (b.t - a.t);
            return {lerp8(a.c.r, b.c.r, s), lerp8(a.c.g, b.c.g, s), lerp8(a.c.b, b.c.b, s)};
        }
    }
    return lut->back().c;
}

Viewport Viewport::fit(const TriMesh& mesh, int size) {
    if (mesh.nodes.empty()) throw std::invalid_argument("empty mesh");
    Vec2 lo = mesh.nodes.front(), hi = lo;
    for (const auto& p : mesh.nodes) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double span = std::max(hi.x() - lo.x(), hi.y() - lo.y()) * 1.06;
    const Vec2 mid = 0.5 * (lo + hi);
    Viewport v;
    v.size = size;
    v.scale = size / span;
    v.x0 = mid.x() - 0.5 * span;
    v.y0 = mid.y() - 0.5 * span;
    return v;
}

Vec2 Viewport::to_pixel(const Vec2& x) const {
    return Vec2((x.x() - x0) * scale, size - (x.y() - y0) * scale);
}

Vec2 Viewport::to_domain(double col, double row) const {
    return Vec2(x0 + col / scale, y0 + (size - row) / scale);
}

Image render_field(const TriMesh& mesh, const Eigen::VectorXd& values, const RenderOptions& opt) {
    if (values.size() != mesh.node_count())
        throw std::invalid_argument("field size does not match mesh");
    if (opt.size < 1) throw std::invalid_argument("image size must be positive");
    if (!known_colormap(opt.colormap))
        throw std::invalid_argument("unknown colormap '" + opt.colormap + "'");
    const auto range = value_range(values, opt);
    const Viewport vp = Viewport::fit(mesh, opt.size);

    Image img;
    img.width = img.height = opt.size;
    img.rgb.resize(3 * static_cast<std::size_t>(opt.size) * opt.size);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) img.set(x, y, opt.background);

    for (const auto& tri : mesh.triangles) {
        std::array<Vec2, 3> p;
        for (int k = 0; k < 3; ++k) p[k] = vp.to_pixel(mesh.nodes[tri[k]]);
        const double det = (p[1] - p[0]).x() * (p[2] - p[0]).y() - (p[1] - p[0]).y() * (p[2] - p[0]).x();
        if (det == 0.0) continue;
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].x(), p[1].x(), p[2].x()}))));
        const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::max({p[0].x(), p[1].x(), p[2].x()}))));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].y(), p[1].y(), p[2].y()}))));
        const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::max({p[0].y(), p[1].y(), p[2].y()}))));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const Vec2 q(x + 0.5, y + 0.5);
                const double l1 = ((q - p[0]).x() * (p[2] - p[0]).y() - (q - p[0]).y() * (p[2] - p[0]).x()) / det;
                const double l2 = ((p[1] - p[0]).x() * (q - p[0]).y() - (p[1] - p[0]).y() * (q - p[0]).x()) / det;
                const double l0 = 1.0 - l1 - l2;
                constexpr double eps = -1e-12;
                if (l0 < eps || l1 < eps || l2 < eps) continue;
                const double v = l0 * values[tri[0]] + l1 * values[tri[1]] + l2 * values[tri[2]];
                img.set(x, y, colormap(opt.colormap, normalize(v, range)));
            }
    }

    const double radius = 0.5 * opt.electrode_width;
    if (radius > 0.0)
        for (const auto& e : mesh.boundary) {
            if (e.label == kGap) continue;
            const Vec2 a = vp.to_pixel(mesh.nodes[e.a]), b = vp.to_pixel(mesh.nodes[e.b]);
            const int steps = std::max(1, static_cast<int>(std::ceil((b - a).norm() / 0.5)));
            for (int s = 0; s <= steps; ++s) {
                const Vec2 c = a + (b - a) * (static_cast<double>(s) / steps);
                stamp_disc(img, c.x(), c.y(), radius, opt.electrode);
            }
        }
    return img;
}

Image render_matrix(const Eigen::MatrixXd& values, const RenderOptions& opt) {
    if (values.size() == 0) throw std::invalid_argument("empty matrix");
    if (!known_colormap(opt.colormap))
        throw std::invalid_argument("unknown colormap '" + opt.colormap + "'");
    const auto range = value_range(values, opt);
    Image img;
    img.width = img.height = opt.size;
    img.rgb.resize(3 * static_cast<std::size_t>(opt.size) * opt.size);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const Eigen::Index r = static_cast<Eigen::Index>(y) * values.rows() / img.height;
            const Eigen::Index c = static_cast<Eigen::Index>(x) * values.cols() / img.width;
            img.set(x, y, colormap(opt.colormap, normalize(values(r, c), range)));
        }
    return img;
}

std::string encode_png(const Image& image,
                       const std::vector<std::pair<std::string, std::string>>& text) {
    if (image.width < 1 || image.height < 1 ||
        image.rgb.size() != 3 * static_cast<std::size_t>(image.width) * image.height)
        throw std::invalid_argument("malformed image");
    std::string out("\x89PNG\r\n\x1a\n", 8);

    std::string ihdr;
    for (std::uint32_t v : {static_cast<std::uint32_t>(image.width), static_cast<std::uint32_t>(image.height)})
        for (int s = 24; s >= 0; s -= 8) ihdr.push_back(static_cast<char>((v >> s) & 0xff));
    ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit RGB, no interlace
    append_chunk(out, "IHDR", ihdr);

    for (const auto& [k, v] : text) append_chunk(out, "tEXt", k + std::string(1, '\0') + v);

    std::string raw;
    raw.reserve(image.rgb.size() + image.height);
    const std::size_t stride = 3 * static_cast<std::size_t>(image.width);
    for (int y = 0; y < image.height; ++y) {
        raw.push_back('\0');  // filter: none
        raw.append(reinterpret_cast<const char*>(image.rgb.data()) + y * stride, stride);
    }
    uLongf n = compressBound(static_cast<uLong>(raw.size()));
    std::string z(n, '\0');
    if (compress2(reinterpret_cast<Bytef*>(z.data()), &n, reinterpret_cast<const Bytef*>(raw.data()),
                  static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw std::runtime_error("zlib compression failed");
    z.resize(n);
    append_chunk(out, "IDAT", z);
    append_chunk(out, "IEND", "");
    return out;
}

void write_png(const std::string& path, const Image& image,
               const std::vector<std::pair<std::string, std::string>>& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    const std::string data = encode_png(image, text);
    f.write(data.data(), static_cast<std::streamsize>(data.size()));
}

}  // namespace eitcem
