#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dclnas/evo.hpp"
#include "dclnas/nn.hpp"
#include "dclnas/paths.hpp"

namespace dclnas {

inline constexpr double kUncertaintySigma = 0.05;
inline constexpr int kUncertaintyPasses = 8;

// Candidate indices refer to the concatenation parents ++ offspring.
struct FamilyPartition {
    std::vector<std::vector<int>> families;  // per parent: offspring indices, nearest first
    std::vector<int> overflow;               // offspring claimed by no family
};

// Parents in order each claim their c_a nearest unclaimed offspring by
// Manhattan distance; ties go to the lower offspring hash, then lower index.
FamilyPartition build_families(const std::vector<HardEncoding>& parents, const std::vector<HardEncoding>& offspring,
                               const std::vector<ArchHash>& offspring_hashes, int c_a);

struct SelectionResult {
    std::vector<Architecture> survivors;
    std::vector<double> survivor_scores;
    FamilyPartition families;
    int from_families = 0;  // survivors chosen as family winners
};

// Each family (parent included) contributes its best-scored member; leftover
// slots go to the best remaining candidates overall. Candidates sharing a hash
// are considered once, parents first. Throws ShortfallError when fewer than
// n unique candidates exist.
SelectionResult environment_selection(const SearchSpace& space, const PathTable& table,
                                      const std::vector<Architecture>& parents,
                                      const std::vector<Architecture>& offspring, const PredictorModel& model, int n,
                                      int c_a);

// Perturbed Score-layer weights: w * (1 + sigma * z), z ~ N(0, 1).
struct ScorePerturbations {
    std::vector<Eigen::RowVectorXd> weights;
    double bias = 0.0;
};
ScorePerturbations draw_perturbations(const PredictorModel& model, int passes, double sigma, Rng& rng);

// Sample standard deviation of the perturbed scores for each row of `hidden`
// (the Score layer input). Throws ParameterError for fewer than two passes.
Eigen::VectorXd score_uncertainty(const ScorePerturbations& p, const Eigen::MatrixXd& hidden);

double predict_uncertainty(const PredictorModel& model, const SearchSpace& space, const PathTable& table,
                           const Architecture& arch, int passes, Rng& rng, double sigma = kUncertaintySigma);

// Both objectives are maximized. Returns front index lists, best front first,
// members in ascending index order.
std::vector<std::vector<int>> fast_non_dominated_sort(const std::vector<std::array<double, 2>>& objectives);

// Objective-space crowding within one front; boundary points get +inf.
std::vector<double> pareto_crowding(const std::vector<std::array<double, 2>>& objectives,
                                    const std::vector<int>& front);

struct InfillCandidate {
    Architecture arch;
    double predicted_score = 0.0;
    double uncertainty = 0.0;
    int front = -1;
};

struct InfillResult {
    std::vector<Architecture> selected;
    std::vector<InfillCandidate> candidates;  // deduplicated pool
    std::vector<int> selected_indices;        // into candidates
};

// Ranks the pool on (score, uncertainty); whole fronts are taken in order
// and the cut front is resolved by descending pareto_crowding. Pool members
// already in `archive` (or repeated) are dropped first; throws ShortfallError
// if fewer than n_infill remain.
InfillResult infill_sampling(const SearchSpace& space, const PathTable& table, const std::vector<Architecture>& pool,
                             const PredictorModel& model, int n_infill, const HashSet& archive, Rng& rng,
                             int passes = kUncertaintyPasses, double sigma = kUncertaintySigma);

}  // namespace dclnas
