#include "tubes/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace tubes::eval {

std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>> &cost) {
    const int n = static_cast<int>(cost.size());
    if (n == 0) return {};
    const int m = static_cast<int>(cost[0].size());
    if (n > m) throw std::invalid_argument("hungarian_min_cost: requires rows <= cols");

    // Potentials formulation with 1-based sentinels.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(m) + 1, 0.0);
    std::vector<int> p(static_cast<size_t>(m) + 1, 0), way(static_cast<size_t>(m) + 1, 0);

    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(m) + 1, inf);
        std::vector<char> used(static_cast<size_t>(m) + 1, 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            const int i0 = p[static_cast<size_t>(j0)];
            double delta = inf;
            int j1 = -1;
            for (int j = 1; j <= m; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur = cost[static_cast<size_t>(i0) - 1][static_cast<size_t>(j) - 1] -
                                   u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> assignment(static_cast<size_t>(n), -1);
    for (int j = 1; j <= m; ++j)
        if (p[static_cast<size_t>(j)] > 0) assignment[static_cast<size_t>(p[static_cast<size_t>(j)]) - 1] = j - 1;
    return assignment;
}

namespace {

struct FrameEntry {
    const Track *track;
    const TrackFrame *frame;
};

std::map<int, std::vector<FrameEntry>> index_by_frame(const TrackSet &tracks) {
    std::map<int, std::vector<FrameEntry>> by_frame;
    for (const auto &track : tracks)
        for (const auto &[frame, tf] : track.frames) by_frame[frame].push_back({&track, &tf});
    return by_frame;
}

}  // namespace

MotResult clear_mot(const TrackSet &gt, const TrackSet &pred, double iou_threshold) {
    MotResult result;

    const auto gt_by_frame = index_by_frame(gt);
    const auto pred_by_frame = index_by_frame(pred);

    std::set<int> frames;
    for (const auto &[f, _] : gt_by_frame) frames.insert(f);
    for (const auto &[f, _] : pred_by_frame) frames.insert(f);

    std::map<int, int> last_match;  // gt id -> most recent matched pred id

    for (int t : frames) {
        const auto git = gt_by_frame.find(t);
        const auto pit = pred_by_frame.find(t);
        const std::vector<FrameEntry> empty;
        const auto &gts = git != gt_by_frame.end() ? git->second : empty;
        const auto &preds = pit != pred_by_frame.end() ? pit->second : empty;
        result.total_gt += static_cast<long>(gts.size());

        std::vector<char> gt_done(gts.size(), 0), pred_done(preds.size(), 0);

        // Keep surviving correspondences from previous frames.
        for (size_t g = 0; g < gts.size(); ++g) {
            const auto lm = last_match.find(gts[g].track->id);
            if (lm == last_match.end()) continue;
            for (size_t p = 0; p < preds.size(); ++p) {
                if (pred_done[p] || preds[p].track->id != lm->second) continue;
                const double iou = geometry::mask_iou(gts[g].frame->mask, preds[p].frame->mask);
                if (iou >= iou_threshold) {
                    gt_done[g] = 1;
                    pred_done[p] = 1;
                    ++result.matches;
                    result.assignment_log.push_back({t, gts[g].track->id, preds[p].track->id, iou});
                }
                break;
            }
        }

        // Optimal assignment of the remainder by maximum total IoU.
        std::vector<int> open_gt, open_pred;
        for (size_t g = 0; g < gts.size(); ++g)
            if (!gt_done[g]) open_gt.push_back(static_cast<int>(g));
        for (size_t p = 0; p < preds.size(); ++p)
            if (!pred_done[p]) open_pred.push_back(static_cast<int>(p));

        if (!open_gt.empty() && !open_pred.empty()) {
            const double kForbidden = 10.0;  // cost for pairs below the threshold
            const bool transpose = open_gt.size() > open_pred.size();
            const size_t rows = transpose ? open_pred.size() : open_gt.size();
            const size_t cols = transpose ? open_gt.size() : open_pred.size();
            std::vector<std::vector<double>> cost(rows, std::vector<double>(cols, kForbidden));
            for (size_t a = 0; a < open_gt.size(); ++a) {
                for (size_t b = 0; b < open_pred.size(); ++b) {
                    const double iou =
                        geometry::mask_iou(gts[static_cast<size_t>(open_gt[a])].frame->mask,
                                           preds[static_cast<size_t>(open_pred[b])].frame->mask);
                    if (iou >= iou_threshold) {
                        if (transpose)
                            cost[b][a] = -iou;
                        else
                            cost[a][b] = -iou;
                    }
                }
            }
            const std::vector<int> assign = hungarian_min_cost(cost);
            for (size_t r = 0; r < assign.size(); ++r) {
                if (assign[r] < 0) continue;
                const size_t a = transpose ? static_cast<size_t>(assign[r]) : r;
                const size_t b = transpose ? r : static_cast<size_t>(assign[r]);
                const double iou =
                    geometry::mask_iou(gts[static_cast<size_t>(open_gt[a])].frame->mask,
                                       preds[static_cast<size_t>(open_pred[b])].frame->mask);
                if (iou < iou_threshold) continue;

                const int gt_id = gts[static_cast<size_t>(open_gt[a])].track->id;
                const int pred_id = preds[static_cast<size_t>(open_pred[b])].track->id;
                const auto lm = last_match.find(gt_id);
                if (lm != last_match.end() && lm->second != pred_id) ++result.id_switches;
                last_match[gt_id] = pred_id;

                gt_done[static_cast<size_t>(open_gt[a])] = 1;
                pred_done[static_cast<size_t>(open_pred[b])] = 1;
                ++result.matches;
                result.assignment_log.push_back({t, gt_id, pred_id, iou});
            }
        }

        for (size_t g = 0; g < gts.size(); ++g)
            if (!gt_done[g]) ++result.misses;
        for (size_t p = 0; p < preds.size(); ++p)
            if (!pred_done[p]) ++result.false_positives;
    }

    result.mota = result.total_gt == 0
                      ? 1.0
                      : 1.0 - static_cast<double>(result.misses + result.false_positives +
                                                  result.id_switches) /
                                  static_cast<double>(result.total_gt);
    return result;
}

namespace {

double recall_at_budget(const std::map<int, std::vector<FrameEntry>> &gt_by_frame,
                        const std::map<int, std::vector<const geometry::BitMask *>> &kept_by_frame,
                        double iou_threshold) {
    long total = 0, recalled = 0;
    for (const auto &[t, gts] : gt_by_frame) {
        total += static_cast<long>(gts.size());
        const auto kit = kept_by_frame.find(t);
        if (kit == kept_by_frame.end()) continue;
        for (const auto &g : gts) {
            for (const auto *mask : kit->second) {
                if (geometry::mask_iou(g.frame->mask, *mask) > iou_threshold) {
                    ++recalled;
                    break;
                }
            }
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(recalled) / static_cast<double>(total);
}

}  // namespace

std::vector<RecallPoint> proposal_recall_curve(
    const std::vector<std::vector<proposals::FrameProposal>> &proposal_frames, const TrackSet &gt,
    const std::vector<int> &budgets, double iou_threshold) {
    const auto gt_by_frame = index_by_frame(gt);

    // Rank proposals per frame by objectness (ties by index).
    std::vector<std::vector<const proposals::FrameProposal *>> ranked(proposal_frames.size());
    for (size_t t = 0; t < proposal_frames.size(); ++t) {
        for (const auto &p : proposal_frames[t]) ranked[t].push_back(&p);
        std::stable_sort(ranked[t].begin(), ranked[t].end(),
                         [](const auto *a, const auto *b) { return a->objectness > b->objectness; });
    }

    std::vector<RecallPoint> curve;
    for (int budget : budgets) {
        std::map<int, std::vector<const geometry::BitMask *>> kept;
        for (size_t t = 0; t < ranked.size(); ++t) {
            auto &dst = kept[static_cast<int>(t)];
            for (size_t k = 0; k < ranked[t].size() && k < static_cast<size_t>(budget); ++k)
                dst.push_back(&ranked[t][k]->mask);
        }
        curve.push_back({budget, recall_at_budget(gt_by_frame, kept, iou_threshold)});
    }
    return curve;
}

std::vector<RecallPoint> tube_recall_curve(const TrackSet &pred, const TrackSet &gt,
                                           const std::vector<int> &budgets, double iou_threshold) {
    const auto gt_by_frame = index_by_frame(gt);

    std::vector<const Track *> ranked;
    for (const auto &t : pred) ranked.push_back(&t);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Track *a, const Track *b) { return a->score > b->score; });

    std::vector<RecallPoint> curve;
    for (int budget : budgets) {
        std::map<int, std::vector<const geometry::BitMask *>> kept;
        for (size_t k = 0; k < ranked.size() && k < static_cast<size_t>(budget); ++k)
            for (const auto &[frame, tf] : ranked[k]->frames) kept[frame].push_back(&tf.mask);
        curve.push_back({budget, recall_at_budget(gt_by_frame, kept, iou_threshold)});
    }
    return curve;
}

std::vector<DistanceBin> loc_error_by_distance(const TrackSet &gt, const TrackSet &pred,
                                               const std::vector<double> &bin_edges,
                                               double iou_threshold) {
    if (bin_edges.size() < 2) throw std::invalid_argument("loc_error_by_distance: need >= 2 edges");
    const MotResult mot = clear_mot(gt, pred, iou_threshold);

    std::vector<DistanceBin> bins;
    for (size_t i = 0; i + 1 < bin_edges.size(); ++i)
        bins.push_back({bin_edges[i], bin_edges[i + 1], 0, 0, 0.0, 0.0});

    auto bin_of = [&](double d) -> int {
        for (size_t i = 0; i < bins.size(); ++i)
            if (d >= bins[i].lo && d < bins[i].hi) return static_cast<int>(i);
        return -1;
    };

    std::map<std::pair<int, int>, const Track *> gt_lookup, pred_lookup;
    for (const auto &t : gt)
        for (const auto &[f, _] : t.frames) gt_lookup[{t.id, f}] = &t;
    for (const auto &t : pred)
        for (const auto &[f, _] : t.frames) pred_lookup[{t.id, f}] = &t;

    for (const auto &track : gt) {
        for (const auto &[frame, tf] : track.frames) {
            if (!tf.has_position) continue;
            const int b = bin_of(tf.position_cam.norm());
            if (b >= 0) ++bins[static_cast<size_t>(b)].gt_count;
        }
    }

    std::vector<double> error_sums(bins.size(), 0.0);
    for (const auto &pairing : mot.assignment_log) {
        const auto git = gt_lookup.find({pairing.gt_id, pairing.frame});
        const auto pit = pred_lookup.find({pairing.pred_id, pairing.frame});
        if (git == gt_lookup.end() || pit == pred_lookup.end()) continue;
        const TrackFrame &gf = git->second->frames.at(pairing.frame);
        const TrackFrame &pf = pit->second->frames.at(pairing.frame);
        if (!gf.has_position || !pf.has_position) continue;
        const int b = bin_of(gf.position_cam.norm());
        if (b < 0) continue;
        ++bins[static_cast<size_t>(b)].matched;
        error_sums[static_cast<size_t>(b)] += (gf.position_cam - pf.position_cam).norm();
    }

    std::vector<DistanceBin> populated;
    for (size_t i = 0; i < bins.size(); ++i) {
        if (bins[i].gt_count == 0) continue;
        bins[i].recall = static_cast<double>(bins[i].matched) / static_cast<double>(bins[i].gt_count);
        bins[i].mean_error = bins[i].matched > 0 ? error_sums[i] / static_cast<double>(bins[i].matched) : 0.0;
        populated.push_back(bins[i]);
    }
    return populated;
}

}  // namespace tubes::eval
