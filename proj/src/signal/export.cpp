// Copyright 2026 The CMKT-SE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cmkt/signal/export.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>

#include "cmkt/error.hpp"

namespace cmkt::signal {

void WriteMatrixCsv(const std::filesystem::path &path, const RealMatrix &m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  std::string line;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    line.clear();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) line += ',';
      line += fmt::format("{:.9g}", m(r, c));
    }
    line += '\n';
    out << line;
  }
  if (!out) Fail(ErrorKind::kIo, "write failed for " + path.string());
}

void WritePgm(const std::filesystem::path &path, const RealMatrix &m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  out << "P5\n" << m.cols() << ' ' << m.rows() << "\n255\n";
  const double lo = m.size() ? m.minCoeff() : 0.0;
  const double hi = m.size() ? m.maxCoeff() : 0.0;
  std::string pixels(static_cast<std::size_t>(m.size()), static_cast<char>(128));
  if (hi > lo) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double v = std::round(255.0 * (m(r, c) - lo) / (hi - lo));
        pixels[static_cast<std::size_t>(r * m.cols() + c)] =
            static_cast<char>(static_cast<unsigned char>(v));
      }
    }
  }
  out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  if (!out) Fail(ErrorKind::kIo, "write failed for " + path.string());
}

void WriteSpectrogramPgm(const std::filesystem::path &path,
                         const Spectrogram &spec) {
  WritePgm(path, spec.log_amp.transpose().colwise().reverse());
}

}  // namespace cmkt::signal
