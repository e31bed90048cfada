#ifndef PDL_DATAIO_HPP_
#define PDL_DATAIO_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pdl/errors.hpp"
#include "pdl/finite_pd.hpp"
#include "pdl/linalg.hpp"
#include "pdl/optim.hpp"
#include "pdl/rng.hpp"

namespace pdl {

/// Parameters of a synthetic finite task with known ground truth.
struct SyntheticTaskSpec {
  std::size_t card_x = 2;
  std::size_t card_y = 2;
  std::size_t embed_dim = 2;
  double conditional_sharpness = 1.0;  // Dirichlet concentration; 0 gives one-hot rows
  std::uint64_t seed = 0;
  bool operator==(const SyntheticTaskSpec&) const = default;
};

/// Uniform q_X, Dirichlet conditionals, and a random unit-vector embedding per feature.
inline FinitePD make_synthetic(const SyntheticTaskSpec& spec) {
  if (spec.card_x < 2 || spec.card_y < 2) throw InvalidInput("synthetic task needs |X|, |Y| >= 2");
  if (spec.embed_dim == 0) throw InvalidInput("synthetic task needs embed_dim > 0");
  if (!(spec.conditional_sharpness >= 0.0)) throw InvalidInput("conditional_sharpness must be >= 0");
  Rng cond_rng(spec.seed);
  Rng embed_rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  const double px = 1.0 / static_cast<double>(spec.card_x);
  Matrix joint(spec.card_x, spec.card_y);
  for (std::size_t x = 0; x < spec.card_x; ++x) {
    Vector cond(spec.card_y, 0.0);
    if (spec.conditional_sharpness == 0.0) {
      std::size_t best = 0;
      double best_u = -1.0;
      for (std::size_t y = 0; y < spec.card_y; ++y) {
        const double u = cond_rng.uniform();
        if (u > best_u) {
          best_u = u;
          best = y;
        }
      }
      cond[best] = 1.0;
    } else {
      cond = dirichlet(cond_rng, spec.card_y, spec.conditional_sharpness);
    }
    for (std::size_t y = 0; y < spec.card_y; ++y) joint(x, y) = px * cond[y];
  }
  std::vector<Vector> embedding(spec.card_x);
  for (auto& e : embedding) {
    e.resize(spec.embed_dim);
    double n = 0.0;
    do {
      for (double& v : e) v = embed_rng.normal();
      n = norm2(e);
    } while (n == 0.0);
    for (double& v : e) v /= n;
  }
  return FinitePD(std::move(joint), std::move(embedding));
}

/// n i.i.d. draws by inverse-CDF over the row-major flattened joint.
inline std::vector<LabeledPair> sample(const FinitePD& q, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidInput("sample size must be >= 1");
  const auto flat = q.joint().data();
  Vector cdf(flat.size());
  double acc = 0.0;
  std::size_t last_nonzero = 0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    acc += flat[i];
    cdf[i] = acc;
    if (flat[i] > 0.0) last_nonzero = i;
  }
  Rng rng(seed);
  std::vector<LabeledPair> out(n);
  for (auto& s : out) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t cell = it == cdf.end() ? last_nonzero : static_cast<std::size_t>(it - cdf.begin());
    s.x = cell / q.card_y();
    s.y = cell % q.card_y();
  }
  return out;
}

/// Model inputs and labels for a list of draws from q.
inline LabeledData to_labeled_data(const FinitePD& q, const std::vector<LabeledPair>& samples) {
  LabeledData d;
  d.inputs.reserve(samples.size());
  d.labels.reserve(samples.size());
  for (const auto& s : samples) {
    d.inputs.push_back(q.embedding(s.x));
    d.labels.push_back(s.y);
  }
  return d;
}

/// MNIST-format image/label pair, pixels kept as raw bytes.
struct IdxDataset {
  std::size_t rows = 28;
  std::size_t cols = 28;
  std::vector<std::uint8_t> pixels;  // n * rows * cols
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t image_size() const noexcept { return rows * cols; }

  /// Image i scaled to [0, 1].
  Vector image(std::size_t i) const {
    Vector v(image_size());
    const std::uint8_t* p = pixels.data() + i * image_size();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<double>(p[k]) / 255.0;
    return v;
  }

  bool operator==(const IdxDataset&) const = default;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr std::size_t kIdxClasses = 10;

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'", 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t offset, const std::string& path) {
  if (offset + 4 > buf.size()) throw FormatError("truncated header in '" + path + "'", buf.size());
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

inline void check_magic(std::uint32_t found, std::uint32_t expected, const std::string& path) {
  if (found != expected) {
    std::ostringstream msg;
    msg << "bad IDX magic in '" << path << "': expected 0x" << std::hex << expected << ", found 0x" << found;
    throw FormatError(msg.str(), 0);
  }
}

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("cannot write '" + path + "'", 0);
}

}  // namespace detail

/// Parses uncompressed big-endian IDX image (0x803) and label (0x801) files.
inline IdxDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);

  detail::check_magic(detail::read_be32(img, 0, images_path), kIdxImagesMagic, images_path);
  const std::size_t n_img = detail::read_be32(img, 4, images_path);
  IdxDataset ds;
  ds.rows = detail::read_be32(img, 8, images_path);
  ds.cols = detail::read_be32(img, 12, images_path);
  const std::size_t img_payload = n_img * ds.rows * ds.cols;
  if (img.size() < 16 + img_payload) {
    throw FormatError("truncated image payload in '" + images_path + "': need " +
                          std::to_string(16 + img_payload) + " bytes",
                      img.size());
  }

  detail::check_magic(detail::read_be32(lab, 0, labels_path), kIdxLabelsMagic, labels_path);
  const std::size_t n_lab = detail::read_be32(lab, 4, labels_path);
  if (lab.size() < 8 + n_lab) {
    throw FormatError("truncated label payload in '" + labels_path + "': need " + std::to_string(8 + n_lab) +
                          " bytes",
                      lab.size());
  }
  if (n_img != n_lab) {
    throw FormatError("image count " + std::to_string(n_img) + " differs from label count " +
                          std::to_string(n_lab),
                      4);
  }

  ds.pixels.assign(img.begin() + 16, img.begin() + 16 + static_cast<long>(img_payload));
  ds.labels.assign(lab.begin() + 8, lab.begin() + 8 + static_cast<long>(n_lab));
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i] >= kIdxClasses) {
      throw FormatError("label " + std::to_string(ds.labels[i]) + " is not a digit class", 8 + i);
    }
  }
  return ds;
}

inline void write_idx(const IdxDataset& ds, const std::string& images_path, const std::string& labels_path) {
  if (ds.pixels.size() != ds.size() * ds.image_size()) throw InvalidInput("pixel buffer size mismatch");
  std::vector<std::uint8_t> img;
  detail::put_be32(img, kIdxImagesMagic);
  detail::put_be32(img, static_cast<std::uint32_t>(ds.size()));
  detail::put_be32(img, static_cast<std::uint32_t>(ds.rows));
  detail::put_be32(img, static_cast<std::uint32_t>(ds.cols));
  img.insert(img.end(), ds.pixels.begin(), ds.pixels.end());
  std::vector<std::uint8_t> lab;
  detail::put_be32(lab, kIdxLabelsMagic);
  detail::put_be32(lab, static_cast<std::uint32_t>(ds.size()));
  lab.insert(lab.end(), ds.labels.begin(), ds.labels.end());
  detail::write_file(images_path, img);
  detail::write_file(labels_path, lab);
}

/// Seeded choice of `per_class` items from each of the ten classes, in
/// original file order.
inline IdxDataset subsample(const IdxDataset& ds, std::size_t per_class, std::uint64_t seed) {
  if (per_class == 0) throw InvalidInput("per_class must be >= 1");
  std::array<std::vector<std::size_t>, kIdxClasses> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < kIdxClasses; ++c) {
    auto& members = by_class[c];
    if (members.size() < per_class) {
      throw InvalidInput("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                         " items, fewer than " + std::to_string(per_class));
    }
    rng.shuffle(std::span<std::size_t>(members));
    keep.insert(keep.end(), members.begin(), members.begin() + static_cast<long>(per_class));
  }
  std::sort(keep.begin(), keep.end());
  IdxDataset out;
  out.rows = ds.rows;
  out.cols = ds.cols;
  for (std::size_t i : keep) {
    const auto* p = ds.pixels.data() + i * ds.image_size();
    out.pixels.insert(out.pixels.end(), p, p + ds.image_size());
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

inline LabeledData to_labeled_data(const IdxDataset& ds) {
  LabeledData d;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    d.inputs.push_back(ds.image(i));
    d.labels.push_back(ds.labels[i]);
  }
  return d;
}

}  // namespace pdl

#endif  // PDL_DATAIO_HPP_
