// Copyright 2026 The pgac Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pgac/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "pgac/io.hpp"

namespace pgac {
namespace {

Mat unit_rows(const Mat& m) {
  Vec norms = m.rowwise().norm().cwiseMax(1e-12);
  return m.array().colwise() / norms.array();
}

int row_argmax(const Mat& m, Eigen::Index r) {
  int best = 0;
  for (Eigen::Index k = 1; k < m.cols(); ++k) {
    if (m(r, k) > m(r, best)) best = static_cast<int>(k);
  }
  return best;
}

}  // namespace

double Codebook::ratio_error() const {
  double err = 0.0;
  for (int k = 0; k < size(); ++k) {
    const Eigen::RowVectorXd c = sums.row(k) / counts(k);
    const double scale = std::max(1.0, vectors.row(k).norm());
    err = std::max(err, (c - vectors.row(k)).norm() / scale);
  }
  return err;
}

Codebook init_codebook(const Mat& pool, int size, double gamma,
                       std::mt19937_64& rng, double jitter) {
  require(pool.rows() > 0, "init_codebook: empty feature pool");
  require(size > 0, "init_codebook: codebook size must be positive");
  require(gamma > 0.0 && gamma < 1.0, "init_codebook: gamma must be in (0,1)");

  // Distinct rows, in first-occurrence order.
  std::vector<int> distinct;
  {
    auto less = [&](int a, int b) {
      return std::lexicographical_compare(
          pool.row(a).begin(), pool.row(a).end(), pool.row(b).begin(), pool.row(b).end());
    };
    std::set<int, decltype(less)> seen(less);
    for (int r = 0; r < pool.rows(); ++r) {
      if (seen.insert(r).second) distinct.push_back(r);
    }
  }
  std::shuffle(distinct.begin(), distinct.end(), rng);

  Codebook cb;
  cb.gamma = gamma;
  cb.vectors.resize(size, pool.cols());
  const int take = std::min<int>(size, static_cast<int>(distinct.size()));
  for (int k = 0; k < take; ++k) cb.vectors.row(k) = pool.row(distinct[k]);
  if (take < size) {
    const double rms = std::sqrt(pool.array().square().mean());
    std::normal_distribution<double> noise(0.0, jitter * std::max(1.0, rms));
    std::uniform_int_distribution<int> pick(0, take - 1);
    for (int k = take; k < size; ++k) {
      cb.vectors.row(k) = pool.row(distinct[pick(rng)]);
      for (Eigen::Index d = 0; d < pool.cols(); ++d) cb.vectors(k, d) += noise(rng);
    }
  }
  cb.counts = Vec::Ones(size);
  cb.sums = cb.vectors;
  cb.update_count = Vec::Zero(size);
  cb.window_count = Eigen::VectorXi::Zero(size);
  return cb;
}

std::vector<int> nearest_code(const Mat& features, const Codebook& codebook) {
  require(features.cols() == codebook.dim(), "nearest_code: dimension mismatch");
  // ‖f − c‖² = ‖f‖² − 2 f·c + ‖c‖²; the ‖f‖² term does not change the argmin.
  const Mat cross = features * codebook.vectors.transpose();
  const Vec cn = codebook.vectors.rowwise().squaredNorm();
  std::vector<int> out(features.rows());
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    int best = 0;
    double bd = cn(0) - 2.0 * cross(r, 0);
    for (int k = 1; k < codebook.size(); ++k) {
      const double d = cn(k) - 2.0 * cross(r, k);
      if (d < bd) {
        bd = d;
        best = k;
      }
    }
    out[r] = best;
  }
  return out;
}

std::vector<int> nearest_code(const Mat& features, const Codebook& codebook,
                              Similarity sim) {
  const Mat s = similarity_logits(features, codebook.vectors, sim);
  std::vector<int> out(features.rows());
  for (Eigen::Index r = 0; r < s.rows(); ++r) out[r] = row_argmax(s, r);
  return out;
}

void kmeans_update(Codebook& cb, const Mat& features,
                   std::span<const int> assignments) {
  require(features.cols() == cb.dim(), "kmeans_update: dimension mismatch");
  require(static_cast<Eigen::Index>(assignments.size()) == features.rows(),
          "kmeans_update: one assignment per feature row required");
  const int k = cb.size();
  Vec n = Vec::Zero(k);
  Mat m = Mat::Zero(k, cb.dim());
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    const int a = assignments[r];
    require(a >= 0 && a < k, "kmeans_update: assignment out of range");
    n(a) += 1.0;
    m.row(a) += features.row(r);
  }
  const double g = cb.gamma;
  cb.counts = g * cb.counts + (1.0 - g) * n;
  cb.sums = g * cb.sums + (1.0 - g) * m;
  for (int c = 0; c < k; ++c) {
    if (n(c) == 0.0) continue;
    cb.vectors.row(c) = cb.sums.row(c) / cb.counts(c);
    cb.update_count(c) += 1.0;
    cb.window_count(c) += 1;
  }
}

Mat similarity_logits(const Mat& features, const Mat& codes, Similarity sim) {
  require(features.cols() == codes.cols(), "similarity: dimension mismatch");
  if (sim == Similarity::kDot) return features * codes.transpose();
  return unit_rows(features) * unit_rows(codes).transpose();
}

Assignment soft_assign(const Mat& features, const Codebook& codebook,
                       double tau, Similarity sim) {
  require(tau > 0.0, "soft_assign: temperature must be positive");
  const Mat logits = similarity_logits(features, codebook.vectors, sim) / tau;
  Assignment out;
  out.probs.resize(logits.rows(), logits.cols());
  out.hard.resize(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int best = row_argmax(logits, r);
    out.hard[r] = best;
    out.probs.row(r) = (logits.row(r).array() - logits(r, best)).exp();
    out.probs.row(r) /= out.probs.row(r).sum();
  }
  return out;
}

double teacher_temperature(long step, long total, double start, double end) {
  require(total >= 0 && step >= 0 && step <= std::max(total, 0L),
          "teacher_temperature: need 0 <= step <= total");
  if (total == 0) return start;
  const double progress = static_cast<double>(step) / static_cast<double>(total);
  return end + (start - end) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double maintenance_weight(double count, double mean_count, double epsilon) {
  const double z = epsilon * (count - mean_count);
  if (z >= 0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

MaintenanceReport maintenance_step(Codebook& cb, const Mat& teacher_features,
                                   MaintenanceMode mode, std::mt19937_64& rng,
                                   double epsilon, double count_decay) {
  require(teacher_features.rows() > 0, "maintenance_step: no teacher features");
  require(teacher_features.cols() == cb.dim(), "maintenance_step: dimension mismatch");
  MaintenanceReport rep;
  rep.dead_count = static_cast<int>((cb.window_count.array() == 0).count());
  if (mode == MaintenanceMode::kOff) return rep;

  const double xmax = cb.update_count.maxCoeff();
  const double xmin = cb.update_count.minCoeff();
  rep.mean_count = 0.5 * (xmax + xmin);
  rep.epsilon = epsilon > 0.0 ? epsilon : 6.0 / (xmax - xmin + 1.0);
  rep.alpha.resize(cb.size());
  for (int k = 0; k < cb.size(); ++k) {
    rep.alpha[k] = maintenance_weight(cb.update_count(k), rep.mean_count, rep.epsilon);
  }

  const Mat before = cb.vectors;
  if (mode == MaintenanceMode::kMeaningful) {
    const Mat sim = similarity_logits(cb.vectors, teacher_features, Similarity::kCosine);
    for (int k = 0; k < cb.size(); ++k) {
      const int t = row_argmax(sim, k);
      cb.vectors.row(k) =
          (1.0 - rep.alpha[k]) * cb.vectors.row(k) + rep.alpha[k] * teacher_features.row(t);
    }
  } else {
    std::uniform_int_distribution<Eigen::Index> pick(0, teacher_features.rows() - 1);
    for (int k = 0; k < cb.size(); ++k) {
      const Eigen::Index t = pick(rng);
      cb.vectors.row(k) =
          (1.0 - rep.alpha[k]) * cb.vectors.row(k) + rep.alpha[k] * teacher_features.row(t);
    }
  }
  for (int k = 0; k < cb.size(); ++k) {
    cb.sums.row(k) = cb.vectors.row(k) * cb.counts(k);
    rep.max_shift = std::max(rep.max_shift, (cb.vectors.row(k) - before.row(k)).norm());
  }
  cb.update_count *= count_decay;
  return rep;
}

double dead_fraction(const Codebook& cb, double threshold, CountWindow window) {
  require(threshold >= 0.0, "dead_fraction: threshold must be non-negative");
  if (cb.size() == 0) return 0.0;
  int dead = 0;
  for (int k = 0; k < cb.size(); ++k) {
    const double x = window == CountWindow::kWindow
                         ? static_cast<double>(cb.window_count(k))
                         : cb.update_count(k);
    if (x <= threshold) ++dead;
  }
  return static_cast<double>(dead) / cb.size();
}

std::string utilization_export(const Codebook& cb, int height, int width,
                               const std::string& path) {
  require(height > 0 && width > 0 && height * width == cb.size(),
          "utilization_export: H*W must equal the codebook size (" +
              std::to_string(height) + "*" + std::to_string(width) +
              " != " + std::to_string(cb.size()) + ")");
  const double lo = cb.update_count.minCoeff();
  const double hi = cb.update_count.maxCoeff();
  std::string pgm = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (int k = 0; k < cb.size(); ++k) {
    double v;
    if (hi > lo) {
      v = std::round(255.0 * (cb.update_count(k) - lo) / (hi - lo));
    } else {
      v = hi > 0.0 ? 255.0 : 0.0;
    }
    pgm.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  }
  write_file_atomic(path, pgm);

  std::ostringstream csv;
  csv.precision(17);
  csv << "index,row,col,update_count,window_count\n";
  for (int k = 0; k < cb.size(); ++k) {
    csv << k << ',' << k / width << ',' << k % width << ',' << cb.update_count(k)
        << ',' << cb.window_count(k) << '\n';
  }
  std::string csv_path = path;
  if (csv_path.size() >= 4 && csv_path.compare(csv_path.size() - 4, 4, ".pgm") == 0) {
    csv_path.replace(csv_path.size() - 4, 4, ".csv");
  } else {
    csv_path += ".csv";
  }
  write_file_atomic(csv_path, csv.str());
  return csv_path;
}

}  // namespace pgac
