// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "motiondiff/render.hpp"

#include "motiondiff/binary_io.hpp"
#include "motiondiff/parallel.hpp"

#include <cmath>
#include <sstream>

namespace motiondiff {

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 8> palette{{
    {{228, 26, 28}},
    {{55, 126, 184}},
    {{77, 175, 74}},
    {{152, 78, 163}},
    {{255, 127, 0}},
    {{166, 86, 40}},
    {{247, 129, 191}},
    {{80, 80, 80}},
}};

}  // namespace

std::array<std::uint8_t, 3> Image::at(int x, int y) const {
    const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

Eigen::Vector2d project_to_pixel(const Eigen::Vector3d& p, int image_size) {
    return {(p.x() + 1.0) * 0.5 * image_size, (1.0 - p.y()) * 0.5 * image_size};
}

Image render_frame(const CanonicalKeypoints& xc, const MotionFrame& frame, int image_size) {
    if (image_size < 1) throw Error("render: image size must be >= 1");
    const Mat pts = transform_keypoints(xc, frame);
    Image img{image_size, image_size, std::vector<std::uint8_t>(static_cast<std::size_t>(image_size) * image_size * 3, 255)};
    const double r = image_size / 64.0;
    for (Eigen::Index k = 0; k < pts.rows(); ++k) {
        const Eigen::Vector2d c = project_to_pixel(pts.row(k).transpose(), image_size);
        const auto& color = palette[static_cast<std::size_t>(k) % palette.size()];
        // pixel (x, y) covers [x, x + 1) x [y, y + 1); test its center
        const int x0 = std::max(0, static_cast<int>(std::floor(c.x() - r)));
        const int x1 = std::min(image_size - 1, static_cast<int>(std::ceil(c.x() + r)));
        const int y0 = std::max(0, static_cast<int>(std::floor(c.y() - r)));
        const int y1 = std::min(image_size - 1, static_cast<int>(std::ceil(c.y() + r)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double dx = x + 0.5 - c.x(), dy = y + 0.5 - c.y();
                if (dx * dx + dy * dy > r * r) continue;
                const auto i = (static_cast<std::size_t>(y) * image_size + x) * 3;
                std::copy(color.begin(), color.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>(i));
            }
    }
    return img;
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
    const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.rgb.begin(), img.rgb.end());
    return out;
}

Image decode_ppm(std::span<const std::uint8_t> bytes, const std::string& source) {
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t += static_cast<char>(bytes[pos++]);
        if (t.empty()) throw FormatError(source, pos, "truncated PPM header");
        return t;
    };
    if (token() != "P6") throw FormatError(source, 0, "bad magic (expected P6)");
    Image img;
    try {
        img.width = std::stoi(token());
        img.height = std::stoi(token());
        if (std::stoi(token()) != 255) throw FormatError(source, pos, "only maxval 255 is supported");
    } catch (const std::invalid_argument&) {
        throw FormatError(source, pos, "non-numeric PPM header field");
    }
    ++pos;  // single whitespace after maxval
    const auto n = static_cast<std::size_t>(img.width) * img.height * 3;
    if (bytes.size() < pos + n) throw FormatError(source, bytes.size(), "truncated PPM pixel data");
    img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
    return img;
}

int render_sequence(const CanonicalKeypoints& xc, const MotionSequence& seq, const std::filesystem::path& out_dir,
                    int image_size) {
    if (xc.points.rows() != seq.keypoints)
        throw ShapeError("render: canonical keypoints have K=" + std::to_string(xc.points.rows()) +
                         " but motion has K=" + std::to_string(seq.keypoints));
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir))
        throw Error(out_dir.string() + ": cannot create output directory");
    std::vector<std::string> names(seq.frames.size());
    parallel_for(seq.frames.size(), [&](std::size_t i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%06zu.ppm", i);
        names[i] = name;
        write_file(out_dir / name, encode_ppm(render_frame(xc, seq.frames[i], image_size)));
    });
    std::ostringstream index;
    for (const auto& n : names) index << n << '\n';
    const std::string text = index.str();
    write_file(out_dir / "index.txt", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    return static_cast<int>(names.size());
}

}  // namespace motiondiff
