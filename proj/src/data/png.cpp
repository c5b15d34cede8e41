#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "elfdd/core/error.hpp"
#include "elfdd/data/dataset.hpp"

namespace elfdd::data {

void write_png_grid(const std::filesystem::path& path, const Tensor& images, std::int64_t rows, std::int64_t cols,
                    int zoom) {
  if (images.rank() != 4) throw ShapeError("png grid needs N x C x H x W images");
  const auto n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  if (c != 1 && c != 3) throw ShapeError("png grid needs 1 or 3 channels");
  if (rows * cols != n) {
    throw ShapeError("png grid of " + std::to_string(rows) + "x" + std::to_string(cols) + " cannot hold " +
                     std::to_string(n) + " images");
  }
  if (zoom < 1) throw ValueError("png zoom must be positive");
  constexpr int kPad = 1;
  const std::int64_t cell_h = h * zoom + kPad, cell_w = w * zoom + kPad;
  const std::int64_t height = rows * cell_h + kPad, width = cols * cell_w + kPad;
  const int out_c = static_cast<int>(c);
  std::vector<png_byte> pixels(static_cast<std::size_t>(height * width * out_c), 128);
  const auto px = images.to_vector();
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t r0 = (i / cols) * cell_h + kPad, c0 = (i % cols) * cell_w + kPad;
    for (std::int64_t y = 0; y < h * zoom; ++y) {
      for (std::int64_t x = 0; x < w * zoom; ++x) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const double v = px[static_cast<std::size_t>(((i * c + ch) * h + y / zoom) * w + x / zoom)];
          pixels[static_cast<std::size_t>(((r0 + y) * width + c0 + x) * out_c + ch)] =
              static_cast<png_byte>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        }
      }
    }
  }

  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!file) throw FormatError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::int64_t y = 0; y < height; ++y) {
    png_write_row(png, pixels.data() + y * width * out_c);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace elfdd::data
