// Copyright 2026 The ORPL Authors.
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

#include "orpl/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace orpl {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

namespace {

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IntegrityError("checkpoint truncated");
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
    os.write(kCheckpointMagic, 4);
    put<std::uint8_t>(os, kCheckpointVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.size()));
    for (const auto& [name, arr] : ckpt) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint32_t>(os, static_cast<std::uint32_t>(arr.shape.size()));
      for (auto d : arr.shape) put<std::int64_t>(os, d);
      os.write(reinterpret_cast<const char*>(arr.data.data()),
               static_cast<std::streamsize>(arr.data.size() * sizeof(float)));
    }
    if (!os) throw IoError("failed writing checkpoint: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("not a checkpoint: " + path.string());
  const auto version = get<std::uint8_t>(is);
  if (version != kCheckpointVersion)
    throw UnsupportedVersionError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(is);
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    NamedArray arr;
    const auto rank = get<std::uint32_t>(is);
    std::int64_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      arr.shape.push_back(get<std::int64_t>(is));
      if (arr.shape.back() < 0) throw IntegrityError("negative dimension in checkpoint");
      n *= arr.shape.back();
    }
    arr.data.resize(static_cast<std::size_t>(n));
    is.read(reinterpret_cast<char*>(arr.data.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!is) throw IntegrityError("checkpoint truncated");
    ckpt.emplace(std::move(name), std::move(arr));
  }
  return ckpt;
}

template <typename S>
void put_matrix(Checkpoint& ckpt, const std::string& name, const Matrix<S>& m) {
  NamedArray arr;
  arr.shape = {m.rows(), m.cols()};
  arr.data.resize(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.size(); ++i) arr.data[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
  ckpt[name] = std::move(arr);
}

template <typename S>
Matrix<S> get_matrix(const Checkpoint& ckpt, const std::string& name) {
  auto it = ckpt.find(name);
  if (it == ckpt.end()) throw IntegrityError("checkpoint lacks '" + name + "'");
  const NamedArray& arr = it->second;
  if (arr.shape.size() != 2) throw IntegrityError("checkpoint entry '" + name + "' is not rank 2");
  Matrix<S> m(arr.shape[0], arr.shape[1]);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(arr.data[static_cast<std::size_t>(i)]);
  return m;
}

void put_scalar(Checkpoint& ckpt, const std::string& name, double value) {
  ckpt[name] = NamedArray{{1}, {static_cast<float>(value)}};
}

double get_scalar(const Checkpoint& ckpt, const std::string& name) {
  auto it = ckpt.find(name);
  if (it == ckpt.end() || it->second.data.size() != 1) throw IntegrityError("checkpoint lacks scalar '" + name + "'");
  return it->second.data[0];
}

template <typename S>
void export_store(const ParamStore<S>& store, const std::string& prefix, Checkpoint& ckpt, bool with_optimizer) {
  for (const auto& [k, e] : store.entries()) {
    put_matrix(ckpt, prefix + "/" + k, e.value);
    if (with_optimizer) {
      put_matrix(ckpt, prefix + "/" + k + "@m", e.m);
      put_matrix(ckpt, prefix + "/" + k + "@v", e.v);
    }
  }
  if (with_optimizer) put_scalar(ckpt, prefix + "/@step", static_cast<double>(store.step()));
}

template <typename S>
void import_store(ParamStore<S>& store, const std::string& prefix, const Checkpoint& ckpt, bool with_optimizer) {
  for (auto& [k, e] : store.entries()) {
    Matrix<S> v = get_matrix<S>(ckpt, prefix + "/" + k);
    if (v.rows() != e.value.rows() || v.cols() != e.value.cols())
      throw IntegrityError("checkpoint shape mismatch for '" + prefix + "/" + k + "'");
    e.value = std::move(v);
    if (with_optimizer) {
      e.m = get_matrix<S>(ckpt, prefix + "/" + k + "@m");
      e.v = get_matrix<S>(ckpt, prefix + "/" + k + "@v");
    }
  }
  if (with_optimizer) store.set_step(static_cast<std::int64_t>(get_scalar(ckpt, prefix + "/@step")));
}

template void put_matrix(Checkpoint&, const std::string&, const Matrix<float>&);
template void put_matrix(Checkpoint&, const std::string&, const Matrix<double>&);
template Matrix<float> get_matrix(const Checkpoint&, const std::string&);
template Matrix<double> get_matrix(const Checkpoint&, const std::string&);
template void export_store(const ParamStore<float>&, const std::string&, Checkpoint&, bool);
template void export_store(const ParamStore<double>&, const std::string&, Checkpoint&, bool);
template void import_store(ParamStore<float>&, const std::string&, const Checkpoint&, bool);
template void import_store(ParamStore<double>&, const std::string&, const Checkpoint&, bool);

void put_string(Checkpoint& ckpt, const std::string& name, const std::string& value) {
  NamedArray a;
  a.shape = {static_cast<std::int64_t>(value.size())};
  a.data.reserve(value.size());
  for (unsigned char c : value) a.data.push_back(static_cast<float>(c));
  ckpt[name] = std::move(a);
}

std::string get_string(const Checkpoint& ckpt, const std::string& name) {
  const auto it = ckpt.find(name);
  if (it == ckpt.end()) throw FormatError("checkpoint has no entry '" + name + "'");
  std::string out;
  out.reserve(it->second.data.size());
  for (float f : it->second.data) {
    if (!(f >= 0.0f && f <= 255.0f) || f != static_cast<float>(static_cast<int>(f)))
      throw IntegrityError("checkpoint entry '" + name + "' is not a byte string");
    out.push_back(static_cast<char>(static_cast<unsigned char>(f)));
  }
  return out;
}

}  // namespace orpl
