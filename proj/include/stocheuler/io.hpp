// Copyright 2026 The stocheuler Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// CSV persistence, SHA-256 digests and run manifests.
//
// Numbers are written in shortest round-trip form, so a reloaded value is
// bit-identical to the one written.

#include <charconv>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "stocheuler/ensemble.hpp"
#include "stocheuler/nonlinearity.hpp"
#include "stocheuler/observables.hpp"
#include "stocheuler/spectral.hpp"

namespace stocheuler {

inline constexpr std::string_view kArtifactVersion = "0.1.0";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw IoError("malformed number '" + std::string(s) + "'");
  }
  return v;
}

inline long long parse_integer(std::string_view s) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw IoError("malformed integer '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Buffered single-writer CSV file.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::string_view header) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    out_ << header << '\n';
  }

  template <class... Ts>
  void row(const Ts&... cols) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cols), first = false), ...);
    out_ << '\n';
  }

  void close() {
    out_.flush();
    if (!out_) throw IoError("write failed for " + path_.string());
    out_.close();
  }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  std::filesystem::path path_;
  std::ofstream out_;
};

/// Parses "sine:kx,ky:re|im:amplitude" or "bump:kx,ky:height:width".
inline CylinderDensity parse_density(std::string_view text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t colon = text.find(':', start);
    parts.emplace_back(text.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  auto bad = [&] {
    return std::invalid_argument("bad density '" + std::string(text) +
                                 "' (expected sine:kx,ky:re|im:amplitude or bump:kx,ky:height:width)");
  };
  if (parts.size() != 4) throw bad();
  const auto mode_parts = split_csv_line(parts[1]);
  if (mode_parts.size() != 2) throw bad();
  ModeIndex mode;
  double a = 0.0, b = 0.0;
  try {
    mode = {static_cast<int>(parse_integer(mode_parts[0])), static_cast<int>(parse_integer(mode_parts[1]))};
    if (parts[0] == "bump") b = parse_double(parts[3]);
    a = parse_double(parts[0] == "sine" ? parts[3] : parts[2]);
  } catch (const IoError&) {
    throw bad();
  }
  if (parts[0] == "sine") {
    if (parts[2] != "re" && parts[2] != "im") throw bad();
    return sine_tilt_density(mode, a, parts[2] == "re" ? ChartPart::Real : ChartPart::Imag);
  }
  if (parts[0] == "bump") return gaussian_bump_density(mode, a, b);
  throw bad();
}

// ---------------------------------------------------------------------------
// Spectral fields: kx,ky,re,im over the full lattice.

inline void write_field_rows(CsvWriter& w, const SpectralField& f) {
  const auto& lat = f.lattice();
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const ModeIndex k = lat.mode(i);
    w.row(k.kx, k.ky, f[i].real(), f[i].imag());
  }
}

inline void write_field_csv(const std::filesystem::path& path, const SpectralField& f) {
  CsvWriter w(path, "kx,ky,re,im");
  write_field_rows(w, f);
  w.close();
}

namespace detail {

struct ModeRecord {
  ModeIndex k;
  Complex z;
};

// Builds a field from full-lattice records, requiring every mode exactly once
// and exact Hermitian symmetry.
inline SpectralField field_from_records(const std::vector<ModeRecord>& recs) {
  int n = 0;
  for (const auto& r : recs) {
    if (r.k.is_zero()) throw IoError("field CSV contains the k = 0 mode");
    n = std::max(n, r.k.norm_inf());
  }
  if (n < 1) throw IoError("field CSV has no modes");
  const LatticePtr lat = build_lattice(n);
  if (recs.size() != lat->size()) {
    throw IoError("field CSV has " + std::to_string(recs.size()) + " rows; lattice N=" + std::to_string(n) +
                  " needs " + std::to_string(lat->size()));
  }
  std::vector<Complex> full(lat->size());
  std::vector<bool> seen(lat->size(), false);
  for (const auto& r : recs) {
    const std::size_t i = lat->index_of(r.k);
    if (seen[i]) throw IoError("duplicate mode " + r.k.to_string() + " in field CSV");
    seen[i] = true;
    full[i] = r.z;
  }
  std::vector<Complex> half(lat->half_size());
  for (std::size_t j = 0; j < half.size(); ++j) {
    const std::size_t i = lat->half_size() + j;
    if (full[lat->mirror(i)] != std::conj(full[i])) {
      throw IoError("field CSV violates Hermitian symmetry at " + lat->mode(i).to_string());
    }
    half[j] = full[i];
  }
  return SpectralField::from_half(lat, std::move(half));
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, std::string_view header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw IoError(path.string() + ": expected header '" + std::string(header) + "'");
  }
  const std::size_t cols = split_csv_line(header).size();
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto parts = split_csv_line(line);
    if (parts.size() != cols) throw IoError(path.string() + ": wrong column count in '" + line + "'");
    rows.emplace_back(parts.begin(), parts.end());
  }
  return rows;
}

}  // namespace detail

inline SpectralField read_field_csv(const std::filesystem::path& path) {
  std::vector<detail::ModeRecord> recs;
  for (const auto& r : detail::read_csv(path, "kx,ky,re,im")) {
    recs.push_back({{static_cast<int>(parse_integer(r[0])), static_cast<int>(parse_integer(r[1]))},
                    {parse_double(r[2]), parse_double(r[3])}});
  }
  return detail::field_from_records(recs);
}

/// sample_id,kx,ky,re,im
inline void write_sample_batch_csv(const std::filesystem::path& path, const std::vector<SpectralField>& fields) {
  CsvWriter w(path, "sample_id,kx,ky,re,im");
  for (std::size_t s = 0; s < fields.size(); ++s) {
    const auto& lat = fields[s].lattice();
    for (std::size_t i = 0; i < lat.size(); ++i) {
      const ModeIndex k = lat.mode(i);
      w.row(s, k.kx, k.ky, fields[s][i].real(), fields[s][i].imag());
    }
  }
  w.close();
}

inline std::vector<SpectralField> read_sample_batch_csv(const std::filesystem::path& path) {
  std::map<long long, std::vector<detail::ModeRecord>> by_id;
  for (const auto& r : detail::read_csv(path, "sample_id,kx,ky,re,im")) {
    by_id[parse_integer(r[0])].push_back(
        {{static_cast<int>(parse_integer(r[1])), static_cast<int>(parse_integer(r[2]))},
         {parse_double(r[3]), parse_double(r[4])}});
  }
  std::vector<SpectralField> out;
  for (const auto& [id, recs] : by_id) out.push_back(detail::field_from_records(recs));
  return out;
}

/// t,sample_id,kx,ky,re,im for the first `count` trajectories.
inline void write_trajectory_csv(const std::filesystem::path& path, const EnsembleRun& run, std::size_t count) {
  CsvWriter w(path, "t,sample_id,kx,ky,re,im");
  count = std::min(count, run.trajectories());
  const auto& lat = *run.lattice;
  for (std::size_t s = 0; s < run.times.size(); ++s) {
    for (std::size_t i = 0; i < count; ++i) {
      const SpectralField f = run.snapshot(s, i);
      for (std::size_t q = 0; q < lat.size(); ++q) {
        const ModeIndex k = lat.mode(q);
        w.row(run.times[s], i, k.kx, k.ky, f[q].real(), f[q].imag());
      }
    }
  }
  w.close();
}

inline void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  CsvWriter w(path, "t,observable,mean,stderr,count");
  for (const auto& r : rows) w.row(r.t, r.observable, r.mean, r.stderr_, r.count);
  w.close();
}

inline std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path) {
  std::vector<SummaryRow> rows;
  for (const auto& r : detail::read_csv(path, "t,observable,mean,stderr,count")) {
    rows.push_back({parse_double(r[0]), r[1], parse_double(r[2]), parse_double(r[3]),
                    static_cast<std::size_t>(parse_integer(r[4]))});
  }
  return rows;
}

inline void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  CsvWriter w(path, "t,mode_kx,mode_ky,estimator,value,threshold,pass");
  for (const auto& r : rows) w.row(r.t, r.mode.kx, r.mode.ky, r.estimator, r.value, r.threshold, r.pass);
  w.close();
}

inline void write_chaos_csv(const std::filesystem::path& path, const ChaosReport& rep) {
  CsvWriter w(path, "quantity,estimate,stderr,n_samples");
  for (const auto& q : rep.quantities()) w.row(q.name, q.estimate, q.stderr_, q.samples);
  w.close();
}

inline void write_histogram_csv(const std::filesystem::path& path, const MarginalHistogram& h) {
  CsvWriter w(path, "re_center,im_center,count");
  for (std::size_t i = 0; i < h.bins(); ++i) {
    for (std::size_t j = 0; j < h.bins(); ++j) w.row(h.bin_center(i), h.bin_center(j), h.count(i, j));
  }
  w.close();
}

// ---------------------------------------------------------------------------
// Digests and manifests.

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw IoError("SHA-256 initialisation failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// manifest.json in a run directory. Written with status "running" before any
/// data, then finalized with file digests.
class RunManifest {
 public:
  RunManifest(std::filesystem::path dir, std::string command, nlohmann::json config, nlohmann::json measure)
      : dir_(std::move(dir)) {
    doc_["artifact_version"] = kArtifactVersion;
    doc_["command"] = std::move(command);
    doc_["config"] = std::move(config);
    doc_["measure"] = std::move(measure);
    doc_["started_at"] = utc_timestamp();
    doc_["status"] = "running";
    doc_["files"] = nlohmann::json::object();
    save();
  }

  void add_file(const std::string& name) { doc_["files"][name] = sha256_file(dir_ / name); }

  void set(const std::string& key, nlohmann::json value) { doc_[key] = std::move(value); }

  void finalize(const std::string& status) {
    doc_["status"] = status;
    doc_["finished_at"] = utc_timestamp();
    save();
  }

  const nlohmann::json& json() const noexcept { return doc_; }

 private:
  void save() const {
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    if (!out) throw IoError("cannot write manifest in " + dir_.string());
    out << doc_.dump(2) << '\n';
    if (!out) throw IoError("manifest write failed in " + dir_.string());
  }

  std::filesystem::path dir_;
  nlohmann::json doc_;
};

inline nlohmann::json load_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("no manifest.json in " + dir.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("unreadable manifest in " + dir.string() + ": " + e.what());
  }
}

/// Throws IoError unless `name` is listed in the manifest with a matching digest.
inline void verify_manifest_file(const std::filesystem::path& dir, const std::string& name) {
  const auto m = load_manifest(dir);
  if (!m.contains("files") || !m["files"].contains(name)) {
    throw IoError(name + " is not listed in " + (dir / "manifest.json").string());
  }
  const std::string want = m["files"][name].get<std::string>();
  const std::string got = sha256_file(dir / name);
  if (want != got) throw IoError("digest mismatch for " + name + ": manifest " + want + ", file " + got);
}

}  // namespace stocheuler
