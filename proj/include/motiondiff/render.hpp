// Copyright (C) 2026 The motiondiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "motiondiff/motion.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace motiondiff {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

    std::array<std::uint8_t, 3> at(int x, int y) const;
};

/// Pixel position of a canonical-space point under orthographic projection:
/// [-1, 1]^2 maps onto the image with +y pointing up.
Eigen::Vector2d project_to_pixel(const Eigen::Vector3d& p, int image_size);

/// Draws one frame: a filled disc of radius image_size / 64 per keypoint on a
/// white background, colored from a fixed palette by keypoint index.
Image render_frame(const CanonicalKeypoints& xc, const MotionFrame& frame, int image_size);

std::vector<std::uint8_t> encode_ppm(const Image& img);
Image decode_ppm(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");

/// Writes frame_%06d.ppm for every frame plus index.txt listing them in order.
/// Returns the number of frames written.
int render_sequence(const CanonicalKeypoints& xc, const MotionSequence& seq, const std::filesystem::path& out_dir,
                    int image_size);

}  // namespace motiondiff
