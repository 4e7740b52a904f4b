#include "vilab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vilab/errors.hpp"

namespace vilab {

Eigen::Index Dataset::num_classes() const {
  int c = 0;
  for (int y : labels) c = std::max(c, y + 1);
  return c;
}

Batch make_batch(const Dataset& data, const std::vector<int>& idx) {
  const Eigen::Index B = static_cast<Eigen::Index>(idx.size());
  if (B == 0) throw ValidationError("make_batch: empty index set");
  const Eigen::Index k = data.feature_dim();
  Batch batch;
  Array x(B * k);
  for (Eigen::Index i = 0; i < B; ++i) {
    const int r = idx[static_cast<size_t>(i)];
    if (r < 0 || r >= data.size())
      throw ValidationError("make_batch: row index out of range");
    x.segment(i * k, k) = data.features.row(r).array();
  }
  batch.inputs = Tensor({B, k}, std::move(x));
  if (data.classification) {
    batch.labels.reserve(static_cast<size_t>(B));
    for (int r : idx) batch.labels.push_back(data.labels[static_cast<size_t>(r)]);
  } else {
    const Eigen::Index t = data.targets.cols();
    Array y(B * t);
    for (Eigen::Index i = 0; i < B; ++i)
      y.segment(i * t, t) = data.targets.row(idx[static_cast<size_t>(i)]).array();
    batch.targets = Tensor({B, t}, std::move(y));
  }
  return batch;
}

Batch full_batch(const Dataset& data) {
  std::vector<int> idx(static_cast<size_t>(data.size()));
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  return make_batch(data, idx);
}

// ---- CSV --------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Dataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("dataset file " + path.string() + " is empty");
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2)
    throw ValidationError("dataset needs at least one feature column and a "
                          "label/target column");
  const std::string& last = header.back();
  Dataset data;
  if (last == "label")
    data.classification = true;
  else if (last == "target")
    data.classification = false;
  else
    throw ValidationError("last CSV column must be 'label' or 'target', got '" +
                          last + "'");
  const Eigen::Index k = static_cast<Eigen::Index>(header.size()) - 1;
  for (Eigen::Index j = 0; j < k; ++j) {
    const std::string want = "f" + std::to_string(j);
    if (header[static_cast<size_t>(j)] != want)
      throw ValidationError("expected feature column '" + want + "', got '" +
                            header[static_cast<size_t>(j)] + "'");
  }

  std::vector<double> values;
  std::vector<int> labels;
  std::vector<double> targets;
  Eigen::Index rows = 0;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (static_cast<Eigen::Index>(f.size()) != k + 1)
      throw ValidationError("dataset row " + std::to_string(line_no) + " has " +
                            std::to_string(f.size()) + " columns, expected " +
                            std::to_string(k + 1));
    try {
      for (Eigen::Index j = 0; j < k; ++j) {
        size_t pos = 0;
        const double v = std::stod(f[static_cast<size_t>(j)], &pos);
        if (pos != f[static_cast<size_t>(j)].size() || !std::isfinite(v))
          throw std::invalid_argument(f[static_cast<size_t>(j)]);
        values.push_back(v);
      }
      if (data.classification) {
        size_t pos = 0;
        const int y = std::stoi(f.back(), &pos);
        if (pos != f.back().size() || y < 0)
          throw std::invalid_argument(f.back());
        labels.push_back(y);
      } else {
        targets.push_back(std::stod(f.back()));
      }
    } catch (const std::exception&) {
      throw ValidationError("bad value in dataset row " + std::to_string(line_no));
    }
    ++rows;
  }
  if (rows == 0) throw ValidationError("dataset has no data rows");
  data.features.resize(rows, k);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      data.features(i, j) = values[static_cast<size_t>(i * k + j)];
  if (data.classification) {
    data.labels = std::move(labels);
  } else {
    data.targets.resize(rows, 1);
    for (Eigen::Index i = 0; i < rows; ++i)
      data.targets(i, 0) = targets[static_cast<size_t>(i)];
  }
  return data;
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ostringstream out;
  const Eigen::Index k = data.feature_dim();
  for (Eigen::Index j = 0; j < k; ++j) out << 'f' << j << ',';
  out << (data.classification ? "label" : "target") << '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features(i, j));
      out << buf << ',';
    }
    if (data.classification) {
      out << data.labels[static_cast<size_t>(i)];
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", data.targets(i, 0));
      out << buf;
    }
    out << '\n';
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ValidationError("cannot write " + path.string());
  f << out.str();
}

// ---- generators -------------------------------------------------------------

DataKind data_kind_from_name(const std::string& s) {
  if (s == "two-moons") return DataKind::two_moons;
  if (s == "xor-blobs") return DataKind::xor_blobs;
  if (s == "blobs") return DataKind::blobs;
  if (s == "label-noise") return DataKind::label_noise;
  throw ValidationError("unknown dataset kind '" + s + "'");
}

const char* data_kind_name(DataKind k) {
  switch (k) {
    case DataKind::two_moons: return "two-moons";
    case DataKind::xor_blobs: return "xor-blobs";
    case DataKind::blobs: return "blobs";
    case DataKind::label_noise: return "label-noise";
  }
  return "?";
}

namespace {

constexpr double kPi = 3.14159265358979323846;

// Two interleaved half circles with N(0, 0.1^2) jitter.
void gen_two_moons(const CounterRng& rng, int n, RowMat& x, std::vector<int>& y) {
  const int n0 = n / 2 + n % 2;
  for (int i = 0; i < n; ++i) {
    const bool lower = i >= n0;
    const double t = kPi * rng.uniform(static_cast<std::uint64_t>(i), 0);
    double px = lower ? 1.0 - std::cos(t) : std::cos(t);
    double py = lower ? 0.5 - std::sin(t) : std::sin(t);
    px += 0.1 * rng.normal(static_cast<std::uint64_t>(i), 1);
    py += 0.1 * rng.normal(static_cast<std::uint64_t>(i), 2);
    x(i, 0) = px;
    x(i, 1) = py;
    y[static_cast<size_t>(i)] = lower ? 1 : 0;
  }
}

// Four unit-variance-0.3 blobs at (+-1, +-1); label = XOR of the signs.
void gen_xor_blobs(const CounterRng& rng, int n, RowMat& x, std::vector<int>& y) {
  for (int i = 0; i < n; ++i) {
    const std::uint64_t quadrant = rng.below(static_cast<std::uint64_t>(i), 0, 4);
    const double cx = (quadrant & 1) ? 1.0 : -1.0;
    const double cy = (quadrant & 2) ? 1.0 : -1.0;
    x(i, 0) = cx + 0.3 * rng.normal(static_cast<std::uint64_t>(i), 1);
    x(i, 1) = cy + 0.3 * rng.normal(static_cast<std::uint64_t>(i), 2);
    y[static_cast<size_t>(i)] = (cx > 0) != (cy > 0) ? 1 : 0;
  }
}

// Two linearly separable blobs at (-1,-1) and (1,1).
void gen_blobs(const CounterRng& rng, int n, RowMat& x, std::vector<int>& y) {
  const int n0 = n / 2 + n % 2;
  for (int i = 0; i < n; ++i) {
    const bool second = i >= n0;
    const double c = second ? 1.0 : -1.0;
    x(i, 0) = c + 0.35 * rng.normal(static_cast<std::uint64_t>(i), 1);
    x(i, 1) = c + 0.35 * rng.normal(static_cast<std::uint64_t>(i), 2);
    y[static_cast<size_t>(i)] = second ? 1 : 0;
  }
}

}  // namespace

std::pair<Dataset, Dataset> gen_data(const GenSpec& spec) {
  if (spec.n < 10) throw ValidationError("gen-data: n must be >= 10");
  if (spec.noise_rate < 0 || spec.noise_rate >= 0.5)
    throw ValidationError("gen-data: noise rate must be in [0, 0.5)");
  if (spec.kind != DataKind::label_noise && spec.noise_rate != 0)
    throw ValidationError("gen-data: noise rate applies to kind label-noise");

  CounterRng rng(spec.seed);
  CounterRng gen_rng = rng.fork(1);
  RowMat x(spec.n, 2);
  std::vector<int> y(static_cast<size_t>(spec.n));
  switch (spec.kind) {
    case DataKind::two_moons:
    case DataKind::label_noise:
      gen_two_moons(gen_rng, spec.n, x, y);
      break;
    case DataKind::xor_blobs:
      gen_xor_blobs(gen_rng, spec.n, x, y);
      break;
    case DataKind::blobs:
      gen_blobs(gen_rng, spec.n, x, y);
      break;
  }
  if (spec.kind == DataKind::label_noise && spec.noise_rate > 0) {
    CounterRng flip = rng.fork(2);
    for (int i = 0; i < spec.n; ++i)
      if (flip.uniform(static_cast<std::uint64_t>(i), 0) <= spec.noise_rate)
        y[static_cast<size_t>(i)] = 1 - y[static_cast<size_t>(i)];
  }

  // stratified 80/20 split: per class, shuffle then cut
  std::vector<std::vector<int>> by_class(2);
  for (int i = 0; i < spec.n; ++i)
    by_class[static_cast<size_t>(y[static_cast<size_t>(i)])].push_back(i);
  CounterRng shuffle_rng = rng.fork(3);
  std::vector<int> train_idx, test_idx;
  for (size_t c = 0; c < by_class.size(); ++c) {
    std::vector<int>& members = by_class[c];
    for (size_t i = members.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(
          shuffle_rng.below(static_cast<std::uint64_t>(c),
                            static_cast<std::uint64_t>(i), i));
      std::swap(members[i - 1], members[j]);
    }
    const size_t cut = members.size() * 4 / 5;
    train_idx.insert(train_idx.end(), members.begin(),
                     members.begin() + static_cast<long>(cut));
    test_idx.insert(test_idx.end(), members.begin() + static_cast<long>(cut),
                    members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  auto subset = [&](const std::vector<int>& idx) {
    Dataset d;
    d.classification = true;
    d.features.resize(static_cast<Eigen::Index>(idx.size()), 2);
    d.labels.reserve(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
      d.features.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
      d.labels.push_back(y[static_cast<size_t>(idx[i])]);
    }
    return d;
  };
  return {subset(train_idx), subset(test_idx)};
}

}  // namespace vilab
