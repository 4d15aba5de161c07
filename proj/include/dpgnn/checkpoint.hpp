#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <zlib.h>

#include "dpgnn/binio.hpp"
#include "dpgnn/error.hpp"
#include "dpgnn/io.hpp"
#include "dpgnn/linalg.hpp"
#include "dpgnn/model.hpp"
#include "dpgnn/optim.hpp"

namespace dpgnn {

// Parameters and optimizer state at one epoch, always held at 64-bit.
struct Checkpoint {
  NodeLayout layout;
  ModelDims dims;
  VariantConfig variant;
  double tau = 0.2;
  Matrix<double> E;
  std::vector<Matrix<double>> W;
  AdamState<double> adam;
  std::uint32_t epoch = 0;
  double best_metric = 0.0;

  friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
    auto same = [](const std::vector<Matrix<double>>& x, const std::vector<Matrix<double>>& y) {
      if (x.size() != y.size()) return false;
      for (std::size_t t = 0; t < x.size(); ++t)
        if (x[t].rows() != y[t].rows() || x[t].cols() != y[t].cols() || x[t] != y[t]) return false;
      return true;
    };
    return a.layout == b.layout && a.dims == b.dims && a.variant == b.variant && a.tau == b.tau &&
           same({a.E}, {b.E}) && same(a.W, b.W) && same({a.adam.mE, a.adam.vE}, {b.adam.mE, b.adam.vE}) &&
           same(a.adam.mW, b.adam.mW) && same(a.adam.vW, b.adam.vW) && a.adam.step == b.adam.step &&
           a.epoch == b.epoch && a.best_metric == b.best_metric;
  }
};

template <typename Scalar>
Checkpoint make_checkpoint(const ModelParams<Scalar>& p, const AdamState<Scalar>& s, const VariantConfig& v,
                           double tau, std::uint32_t epoch, double best_metric) {
  Checkpoint c;
  c.layout = p.layout;
  c.dims = p.dims;
  c.variant = v;
  c.tau = tau;
  c.E = p.E.template cast<double>();
  for (const auto& w : p.W) c.W.push_back(w.template cast<double>());
  c.adam.mE = s.mE.template cast<double>();
  c.adam.vE = s.vE.template cast<double>();
  for (const auto& w : s.mW) c.adam.mW.push_back(w.template cast<double>());
  for (const auto& w : s.vW) c.adam.vW.push_back(w.template cast<double>());
  c.adam.step = s.step;
  c.epoch = epoch;
  c.best_metric = best_metric;
  return c;
}

// Rebuilds model parameters; T must come from the same dataset the checkpoint was trained on.
template <typename Scalar>
ModelParams<Scalar> params_from_checkpoint(const Checkpoint& c, Matrix<Scalar> T) {
  if (T.rows() != static_cast<Eigen::Index>(c.layout.node_count()) || T.cols() != c.dims.d_o) {
    throw InputError("checkpoint dimension mismatch: document matrix is " + std::to_string(T.rows()) + "x" +
                     std::to_string(T.cols()) + ", checkpoint expects " + std::to_string(c.layout.node_count()) +
                     "x" + std::to_string(c.dims.d_o));
  }
  ModelParams<Scalar> p;
  p.layout = c.layout;
  p.dims = c.dims;
  p.E = c.E.template cast<Scalar>();
  for (const auto& w : c.W) p.W.push_back(w.template cast<Scalar>());
  p.T = std::move(T);
  return p;
}

template <typename Scalar>
AdamState<Scalar> adam_from_checkpoint(const Checkpoint& c) {
  AdamState<Scalar> s;
  s.mE = c.adam.mE.template cast<Scalar>();
  s.vE = c.adam.vE.template cast<Scalar>();
  for (const auto& w : c.adam.mW) s.mW.push_back(w.template cast<Scalar>());
  for (const auto& w : c.adam.vW) s.vW.push_back(w.template cast<Scalar>());
  s.step = c.adam.step;
  return s;
}

// Throws when a checkpoint cannot be used with the given layout and document dimension.
inline void check_compatible(const Checkpoint& c, const NodeLayout& expected, std::uint32_t d_o) {
  if (!(c.layout == expected)) {
    throw InputError("checkpoint dimension mismatch: checkpoint has " + std::to_string(c.layout.node_count()) +
                     " nodes (" + (c.layout.dual ? "dual" : "single") + " layout, n=" + std::to_string(c.layout.n) +
                     ", m=" + std::to_string(c.layout.m) + "), config expects " +
                     std::to_string(expected.node_count()) + " (" + (expected.dual ? "dual" : "single") + ")");
  }
  if (c.dims.d_o != d_o) {
    throw InputError("checkpoint dimension mismatch: document dim " + std::to_string(c.dims.d_o) + " vs " +
                     std::to_string(d_o));
  }
}

// ---------------------------------------------------------------------------
// File format: "DPFCKPT1", u32 version, dims block, variant block, f64 tensors
// (E, W*, mE, vE, mW*, vW*), u64 adam step, u32 epoch, f64 best metric, u32 CRC-32
// of all preceding bytes. Little-endian throughout.

inline constexpr char kCheckpointMagic[8] = {'D', 'P', 'F', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_matrix(std::vector<std::uint8_t>& out, const Matrix<double>& M) {
  for (Eigen::Index t = 0; t < M.size(); ++t) binio::put<double>(out, M.data()[t]);
}

inline Matrix<double> get_matrix(binio::Reader& rd, Eigen::Index rows, Eigen::Index cols) {
  Matrix<double> M(rows, cols);
  for (Eigen::Index t = 0; t < M.size(); ++t) M.data()[t] = rd.get<double>();
  return M;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  std::vector<std::uint8_t> out;
  binio::put_bytes(out, kCheckpointMagic, 8);
  binio::put<std::uint32_t>(out, kCheckpointVersion);
  // dims
  binio::put<std::uint32_t>(out, c.layout.n);
  binio::put<std::uint32_t>(out, c.layout.m);
  binio::put<std::uint8_t>(out, c.layout.dual ? 1 : 0);
  binio::put<std::uint32_t>(out, c.dims.d_e);
  binio::put<std::uint32_t>(out, c.dims.d_t);
  binio::put<std::uint32_t>(out, c.dims.d_o);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.W.size()));
  // variant
  binio::put<std::uint8_t>(out, c.variant.dual_graph ? 1 : 0);
  binio::put<std::uint8_t>(out, c.variant.quadruple_loss ? 1 : 0);
  binio::put<double>(out, c.variant.ssl_weight);
  binio::put<double>(out, c.variant.omega);
  binio::put<std::uint32_t>(out, c.variant.layers);
  binio::put<std::uint8_t>(out, static_cast<std::uint8_t>(c.variant.self_edges));
  binio::put<double>(out, c.tau);
  detail::put_matrix(out, c.E);
  for (const auto& w : c.W) detail::put_matrix(out, w);
  detail::put_matrix(out, c.adam.mE);
  detail::put_matrix(out, c.adam.vE);
  for (const auto& w : c.adam.mW) detail::put_matrix(out, w);
  for (const auto& w : c.adam.vW) detail::put_matrix(out, w);
  binio::put<std::uint64_t>(out, c.adam.step);
  binio::put<std::uint32_t>(out, c.epoch);
  binio::put<double>(out, c.best_metric);
  const auto crc = static_cast<std::uint32_t>(::crc32(0L, out.data(), static_cast<uInt>(out.size())));
  binio::put<std::uint32_t>(out, crc);
  return out;
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& what = "<checkpoint>") {
  if (bytes.size() < 8 || !std::equal(bytes.begin(), bytes.begin() + 8, kCheckpointMagic)) {
    throw InputError(what + ": magic mismatch (not a checkpoint file)");
  }
  if (bytes.size() < 16) throw InputError(what + ": truncated payload");
  binio::Reader rd(bytes, what);
  char magic[8];
  rd.take(magic, 8);
  const auto version = rd.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw InputError(what + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.layout.n = rd.get<std::uint32_t>();
  c.layout.m = rd.get<std::uint32_t>();
  c.layout.dual = rd.get<std::uint8_t>() != 0;
  c.dims.d_e = rd.get<std::uint32_t>();
  c.dims.d_t = rd.get<std::uint32_t>();
  c.dims.d_o = rd.get<std::uint32_t>();
  const auto w_count = rd.get<std::uint32_t>();
  if (w_count != 1 && w_count != 2) throw InputError(what + ": invalid projection count");
  c.variant.dual_graph = rd.get<std::uint8_t>() != 0;
  c.variant.quadruple_loss = rd.get<std::uint8_t>() != 0;
  c.variant.ssl_weight = rd.get<double>();
  c.variant.omega = rd.get<double>();
  c.variant.layers = rd.get<std::uint32_t>();
  const auto self = rd.get<std::uint8_t>();
  if (self > 2) throw InputError(what + ": invalid self-edge mode");
  c.variant.self_edges = static_cast<SelfEdgeMode>(self);
  c.tau = rd.get<double>();
  if (c.variant.dual_graph != c.layout.dual) throw InputError(what + ": layout disagrees with variant");

  const std::size_t nodes = c.layout.node_count();
  const std::size_t tensor_doubles =
      3 * nodes * c.dims.d_e + 3 * static_cast<std::size_t>(w_count) * c.dims.d_t * c.dims.d_o;
  const std::size_t tail = 8 + 4 + 8 + 4;
  if (rd.remaining() != tensor_doubles * 8 + tail) {
    throw InputError(what + (rd.remaining() < tensor_doubles * 8 + tail ? ": truncated payload" : ": trailing bytes"));
  }
  const auto stored_crc = [&] {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + b]) << (8 * b);
    return v;
  }();
  const auto crc = static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size() - 4)));
  if (crc != stored_crc) throw InputError(what + ": CRC mismatch (corrupted checkpoint)");

  const auto rows = static_cast<Eigen::Index>(nodes);
  c.E = detail::get_matrix(rd, rows, c.dims.d_e);
  for (std::uint32_t w = 0; w < w_count; ++w) c.W.push_back(detail::get_matrix(rd, c.dims.d_t, c.dims.d_o));
  c.adam.mE = detail::get_matrix(rd, rows, c.dims.d_e);
  c.adam.vE = detail::get_matrix(rd, rows, c.dims.d_e);
  for (std::uint32_t w = 0; w < w_count; ++w) c.adam.mW.push_back(detail::get_matrix(rd, c.dims.d_t, c.dims.d_o));
  for (std::uint32_t w = 0; w < w_count; ++w) c.adam.vW.push_back(detail::get_matrix(rd, c.dims.d_t, c.dims.d_o));
  c.adam.step = rd.get<std::uint64_t>();
  c.epoch = rd.get<std::uint32_t>();
  c.best_metric = rd.get<double>();
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path), path.string());
}

}  // namespace dpgnn
