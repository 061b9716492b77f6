#pragma once

#include <map>
#include <string>
#include <vector>

#include "athv/autodiff.hpp"

namespace athv {

inline constexpr double kNrmseEps = 1e-11;
inline constexpr double kPsnrCapDb = 200.0;

/// sqrt(MSE(x, xhat)) / (max(x) - min(x) + eps).
template <typename T>
double nrmse(const Tensor<T>& x, const Tensor<T>& xhat);

/// NRMSE(x, intermediate) + alpha * NRMSE(x, final), differentiable in both predictions.
template <typename T>
Var<T> dual_loss(const Tensor<T>& x, const Var<T>& intermediate, const Var<T>& final, double alpha = 1.0);

/// 10 log10(peak^2 / MSE) with peak = max(x) - min(x); capped at 200 dB when MSE < 1e-20.
template <typename T>
double psnr(const Tensor<T>& x, const Tensor<T>& xhat);

/// Mean SSIM over every 7x7 window fully inside the image (uniform weights,
/// sample covariances, K1 = 0.01, K2 = 0.03, L = max(x) - min(x)).
template <typename T>
double ssim(const Tensor<T>& x, const Tensor<T>& xhat);

inline constexpr std::size_t kSsimWindow = 7;

/// Shifts and scales both images by the target's range: (v - min x) / (max x - min x).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> normalize_pair(const Tensor<T>& x, const Tensor<T>& xhat);

struct RankingRecord {
  std::string slice_id;
  std::map<std::string, int> ranks;  // model -> rank in 1..N
  std::vector<std::string> order;    // models as listed on the line
};

/// One `slice_id,model=rank,...` record; ranks must be a permutation of 1..N.
RankingRecord parse_ranking_line(const std::string& line);
/// All non-blank, non-'#' lines of a ranking file.
std::vector<RankingRecord> parse_ranking_file(const std::string& text);

/// (N_candidates + 1 - mean rank) / N_candidates.
double priority_score(const std::vector<RankingRecord>& records, const std::string& model);
long raw_rank_sum(const std::vector<RankingRecord>& records, const std::string& model);

}  // namespace athv
