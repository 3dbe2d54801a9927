// Copyright 2026 The fedmix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedmix/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "fedmix/error.hpp"

namespace fedmix {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in, const std::string& what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("model file: truncated " + what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

void save_model(const std::filesystem::path& path, const MlpModel& model) {
  nlohmann::json header;
  header["layer_dims"] = model.layer_dims();
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& s : model.params().shapes()) shapes.push_back({s.rows, s.cols});
  header["shapes"] = shapes;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto values = model.params().values();
  put_u64(out, values.size());
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw Error("write failed for " + path.string());
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::uint64_t header_len = get_u64(in, "header length");
  if (header_len > (1u << 24)) throw FormatError("model file: implausible header length");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) throw FormatError("model file: truncated header");
  std::vector<std::size_t> dims;
  try {
    dims = nlohmann::json::parse(text).at("layer_dims").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: bad header: ") + e.what());
  }
  const std::uint64_t count = get_u64(in, "value count");
  const ParamVector expected(mlp_shape_spec(dims));
  if (count != expected.size()) throw FormatError("model file: value count does not match layer_dims");
  std::vector<double> values(count);
  for (auto& v : values) v = std::bit_cast<double>(get_u64(in, "values"));
  return MlpModel(dims, ParamVector(mlp_shape_spec(dims), std::move(values)));
}

}  // namespace fedmix
