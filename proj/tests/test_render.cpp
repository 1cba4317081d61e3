#include "eitcem/render.hpp"

#include <zlib.h>

#include <doctest.h>

#include <cstdlib>

using namespace eitcem;

namespace {

std::uint32_t be32(const std::string& s, std::size_t at) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v = (v << 8) | static_cast<unsigned char>(s[at + k]);
    return v;
}

int channel_gap(Rgb a, Rgb b) {
    return std::max({std::abs(a.r - b.r), std::abs(a.g - b.g), std::abs(a.b - b.b)});
}

}  // namespace

TEST_CASE("colormaps") {
    CHECK(known_colormap("viridis"));
    CHECK_FALSE(known_colormap("jet"));
    CHECK(colormap("gray", 0.0) == Rgb{0, 0, 0});
    CHECK(colormap("gray", 1.0) == Rgb{255, 255, 255});
    CHECK(colormap("gray", 0.5) == Rgb{128, 128, 128});
    CHECK(colormap("viridis", -3) == colormap("viridis", 0));
    CHECK(colormap("viridis", 7) == colormap("viridis", 1));
    CHECK_THROWS(colormap("jet", 0.5));
}

TEST_CASE("field rendering") {
    const auto lay = DiskElectrodeLayout::equally_spaced(8, 0.2);
    const TriMesh mesh = build_disk_mesh(lay, {0.1, 0.5});
    Eigen::VectorXd f(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i) f[i] = mesh.nodes[i].x() + 2 * mesh.nodes[i].y();
    RenderOptions opt;
    opt.size = 200;
    opt.range = std::make_pair(-3.0, 3.0);
    const Image img = render_field(mesh, f, opt);
    CHECK(img.width == 200);
    CHECK(img.rgb.size() == 3u * 200 * 200);

    // Interpolation is exact for a linear field, so pixels next to interior nodes carry
    // the colormap value at their centers.
    const Viewport vp = Viewport::fit(mesh, opt.size);
    int sampled = 0;
    for (int i = 0; i < mesh.node_count() && sampled < 10; i += 7) {
        if (mesh.nodes[i].norm() > 0.8) continue;
        const Vec2 p = vp.to_pixel(mesh.nodes[i]);
        const int col = static_cast<int>(p.x()), row = static_cast<int>(p.y());
        const Vec2 x = vp.to_domain(col + 0.5, row + 0.5);
        const Rgb expect = colormap("viridis", (x.x() + 2 * x.y() + 3.0) / 6.0);
        CHECK(channel_gap(img.at(col, row), expect) <= 1);
        ++sampled;
    }
    CHECK(sampled == 10);

    CHECK(img.at(0, 0) == opt.background);
    // Electrode arcs are stroked, gaps are not.
    const Vec2 e = vp.to_pixel(Vec2(1, 0));
    CHECK(img.at(static_cast<int>(e.x()) - 1, static_cast<int>(e.y())) == opt.electrode);

    const Image again = render_field(mesh, f, opt);
    CHECK(again.rgb == img.rgb);
    CHECK(encode_png(again) == encode_png(img));

    const Image flat = render_field(mesh, Eigen::VectorXd::Constant(mesh.node_count(), 4.0),
                                    {64, "coolwarm", std::nullopt, {255, 255, 255}, {255, 0, 0}, 0.0});
    const Rgb mid = colormap("coolwarm", 0.5);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const Rgb c = flat.at(x, y);
            CHECK((c == mid || c == Rgb{255, 255, 255}));
        }
    CHECK(flat.at(32, 32) == mid);

    CHECK_THROWS(render_field(mesh, Eigen::VectorXd::Zero(3), opt));
    opt.range = std::make_pair(1.0, 1.0);
    CHECK_THROWS(render_field(mesh, f, opt));
}

TEST_CASE("PNG encoding") {
    Image img;
    img.width = 3;
    img.height = 2;
    img.rgb.assign(18, 0);
    img.set(1, 1, {10, 20, 30});
    CHECK(img.at(1, 1) == Rgb{10, 20, 30});
    const std::string png = encode_png(img, {{"Software", "eitcem"}});
    CHECK(png.substr(0, 8) == std::string("\x89PNG\r\n\x1a\n", 8));

    // Walk the chunks and check every CRC.
    std::size_t at = 8;
    std::vector<std::string> types;
    std::string idat;
    while (at < png.size()) {
        const std::uint32_t n = be32(png, at);
        const std::string type = png.substr(at + 4, 4);
        const std::string body = png.substr(at + 4, 4 + n);
        const uLong crc = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(body.data()),
                                static_cast<uInt>(body.size()));
        CHECK(be32(png, at + 8 + n) == crc);
        if (type == "IDAT") idat = png.substr(at + 8, n);
        types.push_back(type);
        at += 12 + n;
    }
    CHECK(at == png.size());
    CHECK(types == std::vector<std::string>{"IHDR", "tEXt", "IDAT", "IEND"});
    CHECK(be32(png, 16) == 3);
    CHECK(be32(png, 20) == 2);

    std::string raw(2 * (1 + 9), '\0');
    uLongf n = static_cast<uLongf>(raw.size());
    REQUIRE(uncompress(reinterpret_cast<Bytef*>(raw.data()), &n, reinterpret_cast<const Bytef*>(idat.data()),
                       static_cast<uLong>(idat.size())) == Z_OK);
    CHECK(n == raw.size());
    CHECK(static_cast<unsigned char>(raw[10 + 1 + 3]) == 10);
    CHECK(static_cast<unsigned char>(raw[10 + 1 + 5]) == 30);
}

TEST_CASE("matrix heat map") {
    Eigen::MatrixXd m(2, 2);
    m << 0, 1, 2, 3;
    const Image img = render_matrix(m, {4, "gray"});
    CHECK(img.at(0, 0) == Rgb{0, 0, 0});
    CHECK(img.at(3, 3) == Rgb{255, 255, 255});
    CHECK(img.at(3, 0) == colormap("gray", 1.0 / 3));
}
