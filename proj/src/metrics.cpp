#include "athv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "athv/kvtext.hpp"
#include "athv/ops.hpp"

namespace athv {
namespace {

template <typename T>
void check_pair(const Tensor<T>& x, const Tensor<T>& xhat, const char* what) {
  require(x.shape() == xhat.shape(), ErrorCode::ShapeMismatch,
          std::string(what) + ": " + shape_str(x.shape()) + " vs " + shape_str(xhat.shape()));
}

template <typename T>
double range_of(const Tensor<T>& x) {
  const auto [lo, hi] = std::minmax_element(x.data().begin(), x.data().end());
  return double(*hi) - double(*lo);
}

template <typename T>
double mse(const Tensor<T>& x, const Tensor<T>& xhat) {
  double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = double(x[i]) - double(xhat[i]);
    acc += d * d;
  }
  return acc / double(x.size());
}

}  // namespace

template <typename T>
double nrmse(const Tensor<T>& x, const Tensor<T>& xhat) {
  check_pair(x, xhat, "nrmse");
  return std::sqrt(mse(x, xhat)) / (range_of(x) + kNrmseEps);
}

template <typename T>
Var<T> dual_loss(const Tensor<T>& x, const Var<T>& intermediate, const Var<T>& final, double alpha) {
  require(alpha >= 0.0, ErrorCode::InvalidArgument, "alpha must be non-negative");
  const Var<T> first = nrmse_loss(x, intermediate, kNrmseEps);
  if (alpha == 0.0) return first;
  return add(first, scale(nrmse_loss(x, final, kNrmseEps), T(alpha)));
}

template <typename T>
double psnr(const Tensor<T>& x, const Tensor<T>& xhat) {
  check_pair(x, xhat, "psnr");
  const double e = mse(x, xhat);
  if (e < 1e-20) return kPsnrCapDb;
  const double peak = range_of(x);
  return 10.0 * std::log10(peak * peak / e);
}

template <typename T>
double ssim(const Tensor<T>& x, const Tensor<T>& xhat) {
  check_pair(x, xhat, "ssim");
  require(x.rank() == 2, ErrorCode::ShapeMismatch, "ssim needs [H,W] images");
  const std::size_t h = x.dim(0), w = x.dim(1), k = kSsimWindow;
  require(h >= k && w >= k, ErrorCode::InvalidArgument, "image smaller than the 7x7 SSIM window");
  const double L = range_of(x);
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  const double np = double(k * k), cov_norm = np / (np - 1.0);

  // Summed-area tables of x, y, x^2, y^2, xy for O(1) window sums.
  const std::size_t W1 = w + 1;
  std::vector<double> sx((h + 1) * W1), sy(sx.size()), sxx(sx.size()), syy(sx.size()), sxy(sx.size());
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      const double a = x[i * w + j], b = xhat[i * w + j];
      const std::size_t o = (i + 1) * W1 + j + 1, up = i * W1 + j + 1, left = (i + 1) * W1 + j, diag = i * W1 + j;
      sx[o] = a + sx[up] + sx[left] - sx[diag];
      sy[o] = b + sy[up] + sy[left] - sy[diag];
      sxx[o] = a * a + sxx[up] + sxx[left] - sxx[diag];
      syy[o] = b * b + syy[up] + syy[left] - syy[diag];
      sxy[o] = a * b + sxy[up] + sxy[left] - sxy[diag];
    }
  auto box = [&](const std::vector<double>& s, std::size_t i, std::size_t j) {
    return s[(i + k) * W1 + j + k] - s[i * W1 + j + k] - s[(i + k) * W1 + j] + s[i * W1 + j];
  };
  double total = 0;
  for (std::size_t i = 0; i + k <= h; ++i)
    for (std::size_t j = 0; j + k <= w; ++j) {
      const double mx = box(sx, i, j) / np, my = box(sy, i, j) / np;
      const double vx = cov_norm * (box(sxx, i, j) / np - mx * mx);
      const double vy = cov_norm * (box(syy, i, j) / np - my * my);
      const double vxy = cov_norm * (box(sxy, i, j) / np - mx * my);
      total += ((2 * mx * my + c1) * (2 * vxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  return total / double((h - k + 1) * (w - k + 1));
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> normalize_pair(const Tensor<T>& x, const Tensor<T>& xhat) {
  check_pair(x, xhat, "normalize_pair");
  const auto [lo, hi] = std::minmax_element(x.data().begin(), x.data().end());
  const double lo_v = *lo, range = double(*hi) - lo_v;
  const double inv = range > 0 ? 1.0 / range : 1.0;
  Tensor<T> a(x.shape()), b(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    a[i] = T((double(x[i]) - lo_v) * inv);
    b[i] = T((double(xhat[i]) - lo_v) * inv);
  }
  return {std::move(a), std::move(b)};
}

RankingRecord parse_ranking_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  require(fields.size() >= 2, ErrorCode::Parse, "ranking line needs 'slice_id,model=rank,...': '" + line + "'");
  RankingRecord rec;
  rec.slice_id = trim(fields[0]);
  require(!rec.slice_id.empty(), ErrorCode::Parse, "empty slice id in '" + line + "'");
  std::set<int> seen;
  for (std::size_t i = 1; i < fields.size(); ++i) {
    const auto eq = fields[i].find('=');
    require(eq != std::string::npos && eq > 0, ErrorCode::Parse, "expected model=rank, got '" + fields[i] + "'");
    const std::string model = trim(fields[i].substr(0, eq));
    const std::string r = trim(fields[i].substr(eq + 1));
    int rank = 0;
    try {
      std::size_t used = 0;
      rank = std::stoi(r, &used);
      require(used == r.size(), ErrorCode::Parse, "bad rank '" + r + "'");
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Parse, "bad rank '" + r + "' for model " + model);
    }
    require(rec.ranks.emplace(model, rank).second, ErrorCode::Parse, "model " + model + " ranked twice in " + rec.slice_id);
    require(seen.insert(rank).second, ErrorCode::Parse, "duplicate rank " + r + " in " + rec.slice_id);
    rec.order.push_back(model);
  }
  const int n = int(rec.ranks.size());
  require(*seen.begin() == 1 && *seen.rbegin() == n, ErrorCode::Parse,
          "ranks in " + rec.slice_id + " are not a permutation of 1.." + std::to_string(n));
  return rec;
}

std::vector<RankingRecord> parse_ranking_file(const std::string& text) {
  std::vector<RankingRecord> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back(parse_ranking_line(line));
  }
  return out;
}

long raw_rank_sum(const std::vector<RankingRecord>& records, const std::string& model) {
  long total = 0;
  for (const auto& r : records) {
    auto it = r.ranks.find(model);
    require(it != r.ranks.end(), ErrorCode::InvalidArgument, "record " + r.slice_id + " does not rank " + model);
    total += it->second;
  }
  return total;
}

double priority_score(const std::vector<RankingRecord>& records, const std::string& model) {
  require(!records.empty(), ErrorCode::InvalidArgument, "priority score needs at least one record");
  const double candidates = double(records.front().ranks.size());
  for (const auto& r : records)
    require(r.ranks.size() == records.front().ranks.size(), ErrorCode::InvalidArgument,
            "records disagree on the number of candidates");
  const double mean_rank = double(raw_rank_sum(records, model)) / double(records.size());
  return (candidates + 1.0 - mean_rank) / candidates;
}

#define ATHV_INSTANTIATE_METRICS(T)                                                        \
  template double nrmse(const Tensor<T>&, const Tensor<T>&);                               \
  template Var<T> dual_loss(const Tensor<T>&, const Var<T>&, const Var<T>&, double);       \
  template double psnr(const Tensor<T>&, const Tensor<T>&);                                \
  template double ssim(const Tensor<T>&, const Tensor<T>&);                                \
  template std::pair<Tensor<T>, Tensor<T>> normalize_pair(const Tensor<T>&, const Tensor<T>&);

ATHV_INSTANTIATE_METRICS(float)
ATHV_INSTANTIATE_METRICS(double)

}  // namespace athv
