#pragma once

#include <cstdint>
#include <vector>

#include "tubes/tracking/tube.hpp"

namespace tubes::coselect {

/// Binary tube-selection instance: unary scores against a selection cost
/// eps1, plus nonnegative pairwise overlap penalties weighted by eps2.
struct SelectionProblem {
    std::vector<double> theta;  // unary tube scores
    double eps1 = 5.0;
    double eps2 = 40.0;
    // Sparse symmetric pairwise terms, stored once per unordered pair i < j.
    struct PairTerm {
        int i;
        int j;
        double phi;  // >= 0
    };
    std::vector<PairTerm> pairs;

    int size() const { return static_cast<int>(theta.size()); }
};

struct SelectConfig {
    double eps1 = 5.0;
    // Suppression must outbid a duplicate's unary gain: both sides scale with
    // tube length, and ln(1 + IoU) tops out at ln 2 per frame, so eps2 sits
    // near (per-frame tube score) / ln 2.
    double eps2 = 40.0;
    int batch_len = 100;
    std::int64_t node_budget = 1'000'000;
};

/// Overlap penalty between two tubes: sum over co-visible frames of
/// ln(1 + IoU) restricted to [batch_start, batch_end]. Frames where either
/// tube has no mask contribute nothing.
double pairwise_overlap(const tracking::Tube &ti, const tracking::Tube &tj, int batch_start,
                        int batch_end);

/// F(b) = sum_i b_i (eps1 - theta_i) + eps2 * sum_{i<j} b_i b_j phi_ij.
double energy(const std::vector<std::uint8_t> &b, const SelectionProblem &problem);

/// Exhaustive minimizer for problems with at most 20 tubes. Ties break on
/// fewer selected tubes, then the lexicographically smallest vector.
std::vector<std::uint8_t> exact_minimize(const SelectionProblem &problem);

struct MinimizeResult {
    std::vector<std::uint8_t> selection;
    double energy = 0.0;
    bool budget_exhausted = false;
    std::int64_t nodes_expanded = 0;
};

/// Branch and bound with an admissible bound (pairwise terms are nonnegative
/// and dropped); depth-first, branching on the undecided tube with the
/// largest |eps1 - theta|, more promising child first. The greedy descent
/// solution provides the initial incumbent. Stops at the node budget.
MinimizeResult minimize(const SelectionProblem &problem, std::int64_t node_budget = 1'000'000);

/// Greedy descent: adds tubes in decreasing theta order while each addition
/// lowers the energy.
std::vector<std::uint8_t> greedy_select(const SelectionProblem &problem);

struct BatchReport {
    int batch_start = 0;
    int batch_end = 0;
    std::vector<int> tube_ids;
    std::vector<std::uint8_t> selection;
    double energy = 0.0;
    bool budget_exhausted = false;
};

struct CoselectResult {
    std::vector<int> selected_ids;  // tubes selected in every batch they touch
    std::vector<BatchReport> batches;
};

/// Partitions the timeline into consecutive batches, solves each over the
/// tubes intersecting it, and keeps a tube iff selected in every batch it
/// intersects. Tube scores must be filled in beforehand.
CoselectResult coselect_batches(const std::vector<tracking::Tube> &tubes, const SelectConfig &cfg);

}  // namespace tubes::coselect
