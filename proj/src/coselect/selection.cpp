#include "tubes/coselect/selection.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tubes::coselect {

double pairwise_overlap(const tracking::Tube &ti, const tracking::Tube &tj, int batch_start,
                        int batch_end) {
    const int lo = std::max({ti.start_frame(), tj.start_frame(), batch_start});
    const int hi = std::min({ti.end_frame(), tj.end_frame(), batch_end});
    double phi = 0.0;
    for (int t = lo; t <= hi; ++t) {
        const geometry::BitMask *ma = ti.mask_at(t);
        const geometry::BitMask *mb = tj.mask_at(t);
        if (!ma || !mb) continue;
        phi += std::log1p(geometry::mask_iou(*ma, *mb));
    }
    return phi;
}

double energy(const std::vector<std::uint8_t> &b, const SelectionProblem &problem) {
    if (static_cast<int>(b.size()) != problem.size())
        throw std::invalid_argument("energy: selection size mismatch");
    double e = 0.0;
    for (int i = 0; i < problem.size(); ++i)
        if (b[static_cast<size_t>(i)]) e += problem.eps1 - problem.theta[static_cast<size_t>(i)];
    for (const auto &p : problem.pairs)
        if (b[static_cast<size_t>(p.i)] && b[static_cast<size_t>(p.j)]) e += problem.eps2 * p.phi;
    return e;
}

std::vector<std::uint8_t> exact_minimize(const SelectionProblem &problem) {
    const int n = problem.size();
    if (n > 20) throw std::invalid_argument("exact_minimize: refuses more than 20 tubes");
    std::vector<std::uint8_t> best(n, 0);
    double best_energy = 0.0;
    int best_count = 0;

    std::vector<std::uint8_t> b(n, 0);
    for (std::uint64_t code = 0; code < (std::uint64_t(1) << n); ++code) {
        int count = 0;
        for (int i = 0; i < n; ++i) {
            b[static_cast<size_t>(i)] = (code >> i) & 1u;
            count += b[static_cast<size_t>(i)];
        }
        const double e = energy(b, problem);
        bool better = e < best_energy;
        if (e == best_energy) {
            if (count < best_count)
                better = true;
            else if (count == best_count && b < best)
                better = true;
        }
        if (better) {
            best = b;
            best_energy = e;
            best_count = count;
        }
    }
    return best;
}

std::vector<std::uint8_t> greedy_select(const SelectionProblem &problem) {
    const int n = problem.size();
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return problem.theta[static_cast<size_t>(a)] > problem.theta[static_cast<size_t>(b)];
    });

    std::vector<std::uint8_t> b(n, 0);
    double current = 0.0;
    for (int i : order) {
        // Energy delta of switching tube i on.
        double delta = problem.eps1 - problem.theta[static_cast<size_t>(i)];
        for (const auto &p : problem.pairs) {
            if (p.i == i && b[static_cast<size_t>(p.j)]) delta += problem.eps2 * p.phi;
            if (p.j == i && b[static_cast<size_t>(p.i)]) delta += problem.eps2 * p.phi;
        }
        if (delta < 0.0) {
            b[static_cast<size_t>(i)] = 1;
            current += delta;
        }
    }
    (void)current;
    return b;
}

namespace {

struct Node {
    std::vector<std::int8_t> assignment;  // -1 undecided, 0/1 decided
    std::vector<double> on_penalty;       // per tube: eps2 * sum of phi to selected tubes
    double committed = 0.0;               // energy of the decided part
    double bound = 0.0;                   // committed + optimistic undecided
};

// Admissible lower bound: the committed energy plus, per undecided tube, the
// best case of leaving it out or taking it with the pairwise cost it already
// owes the selected set. Pairwise terms among undecided tubes are
// nonnegative and dropped.
double node_bound(const Node &node, const SelectionProblem &problem) {
    double bound = node.committed;
    for (int i = 0; i < problem.size(); ++i) {
        if (node.assignment[static_cast<size_t>(i)] < 0)
            bound += std::min(0.0, problem.eps1 - problem.theta[static_cast<size_t>(i)] +
                                       node.on_penalty[static_cast<size_t>(i)]);
    }
    return bound;
}

}  // namespace

namespace {

MinimizeResult minimize_connected(const SelectionProblem &problem, std::int64_t node_budget);

}  // namespace

MinimizeResult minimize(const SelectionProblem &problem, std::int64_t node_budget) {
    const int n = problem.size();
    MinimizeResult result;
    result.selection.assign(static_cast<size_t>(n), 0);
    if (n == 0) return result;

    // The energy separates over connected components of the overlap graph;
    // solve each component on its own so independent tube groups never blow
    // up the shared search tree.
    std::vector<int> parent(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) parent[static_cast<size_t>(i)] = i;
    std::function<int(int)> find = [&](int x) {
        while (parent[static_cast<size_t>(x)] != x) {
            parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
            x = parent[static_cast<size_t>(x)];
        }
        return x;
    };
    for (const auto &p : problem.pairs) parent[static_cast<size_t>(find(p.i))] = find(p.j);

    std::map<int, std::vector<int>> components;
    for (int i = 0; i < n; ++i) components[find(i)].push_back(i);

    if (components.size() > 1) {
        std::int64_t budget_left = node_budget;
        for (const auto &[root, members] : components) {
            SelectionProblem sub;
            sub.eps1 = problem.eps1;
            sub.eps2 = problem.eps2;
            std::map<int, int> local;
            for (size_t k = 0; k < members.size(); ++k) {
                local[members[k]] = static_cast<int>(k);
                sub.theta.push_back(problem.theta[static_cast<size_t>(members[k])]);
            }
            for (const auto &p : problem.pairs)
                if (local.count(p.i)) sub.pairs.push_back({local[p.i], local[p.j], p.phi});

            const MinimizeResult solved = minimize_connected(sub, budget_left);
            for (size_t k = 0; k < members.size(); ++k)
                result.selection[static_cast<size_t>(members[k])] = solved.selection[k];
            result.energy += solved.energy;
            result.nodes_expanded += solved.nodes_expanded;
            result.budget_exhausted = result.budget_exhausted || solved.budget_exhausted;
            budget_left = std::max<std::int64_t>(0, budget_left - solved.nodes_expanded);
        }
        return result;
    }
    return minimize_connected(problem, node_budget);
}

namespace {

MinimizeResult minimize_connected(const SelectionProblem &problem, std::int64_t node_budget) {
    const int n = problem.size();
    MinimizeResult result;
    result.selection.assign(static_cast<size_t>(n), 0);
    if (n == 0) return result;

    // Adjacency for incremental committed-energy updates.
    std::vector<std::vector<std::pair<int, double>>> adj(static_cast<size_t>(n));
    for (const auto &p : problem.pairs) {
        adj[static_cast<size_t>(p.i)].push_back({p.j, p.phi});
        adj[static_cast<size_t>(p.j)].push_back({p.i, p.phi});
    }

    std::vector<std::uint8_t> incumbent = greedy_select(problem);
    double incumbent_energy = energy(incumbent, problem);
    if (incumbent_energy > 0.0) {
        incumbent.assign(static_cast<size_t>(n), 0);
        incumbent_energy = 0.0;
    }

    Node root;
    root.assignment.assign(static_cast<size_t>(n), -1);
    root.on_penalty.assign(static_cast<size_t>(n), 0.0);
    root.bound = node_bound(root, problem);

    std::vector<Node> stack;
    stack.push_back(std::move(root));
    std::int64_t expanded = 0;

    while (!stack.empty()) {
        if (expanded >= node_budget) {
            result.budget_exhausted = true;
            break;
        }
        Node node = std::move(stack.back());
        stack.pop_back();
        if (node.bound >= incumbent_energy) continue;
        ++expanded;

        // Branch on the undecided tube with the largest |eps1 - theta|.
        int pivot = -1;
        double pivot_mag = -1.0;
        for (int i = 0; i < n; ++i) {
            if (node.assignment[static_cast<size_t>(i)] >= 0) continue;
            const double mag = std::abs(problem.eps1 - problem.theta[static_cast<size_t>(i)]);
            if (mag > pivot_mag) {
                pivot_mag = mag;
                pivot = i;
            }
        }

        if (pivot < 0) {
            // Fully assigned; bound equals the exact energy here.
            if (node.committed < incumbent_energy) {
                incumbent_energy = node.committed;
                for (int i = 0; i < n; ++i)
                    incumbent[static_cast<size_t>(i)] =
                        static_cast<std::uint8_t>(node.assignment[static_cast<size_t>(i)]);
            }
            continue;
        }

        auto make_child = [&](std::int8_t value) {
            Node child = node;
            child.assignment[static_cast<size_t>(pivot)] = value;
            if (value == 1) {
                child.committed += problem.eps1 - problem.theta[static_cast<size_t>(pivot)] +
                                   node.on_penalty[static_cast<size_t>(pivot)];
                for (const auto &[j, phi] : adj[static_cast<size_t>(pivot)])
                    if (child.assignment[static_cast<size_t>(j)] < 0)
                        child.on_penalty[static_cast<size_t>(j)] += problem.eps2 * phi;
            }
            child.bound = node_bound(child, problem);
            return child;
        };

        Node on = make_child(1);
        Node off = make_child(0);
        // Depth-first, more promising child on top of the stack.
        if (on.bound <= off.bound) {
            if (off.bound < incumbent_energy) stack.push_back(std::move(off));
            if (on.bound < incumbent_energy) stack.push_back(std::move(on));
        } else {
            if (on.bound < incumbent_energy) stack.push_back(std::move(on));
            if (off.bound < incumbent_energy) stack.push_back(std::move(off));
        }
    }

    result.selection = std::move(incumbent);
    result.energy = incumbent_energy;
    result.nodes_expanded = expanded;
    return result;
}

}  // namespace

CoselectResult coselect_batches(const std::vector<tracking::Tube> &tubes, const SelectConfig &cfg) {
    CoselectResult result;
    if (tubes.empty()) return result;
    if (cfg.batch_len <= 0) throw std::invalid_argument("coselect_batches: batch_len must be positive");

    int seq_start = std::numeric_limits<int>::max();
    int seq_end = std::numeric_limits<int>::min();
    for (const auto &t : tubes) {
        seq_start = std::min(seq_start, t.start_frame());
        seq_end = std::max(seq_end, t.end_frame());
    }

    std::vector<int> batches_selected(tubes.size(), 0);
    std::vector<int> batches_touched(tubes.size(), 0);

    for (int batch_start = seq_start; batch_start <= seq_end; batch_start += cfg.batch_len) {
        const int batch_end = batch_start + cfg.batch_len - 1;

        std::vector<int> members;
        for (size_t i = 0; i < tubes.size(); ++i) {
            if (tubes[i].start_frame() <= batch_end && tubes[i].end_frame() >= batch_start)
                members.push_back(static_cast<int>(i));
        }
        if (members.empty()) continue;

        SelectionProblem problem;
        problem.eps1 = cfg.eps1;
        problem.eps2 = cfg.eps2;
        problem.theta.reserve(members.size());
        for (int idx : members) problem.theta.push_back(tubes[static_cast<size_t>(idx)].scores.total);
        for (size_t a = 0; a < members.size(); ++a) {
            for (size_t b = a + 1; b < members.size(); ++b) {
                const double phi =
                    pairwise_overlap(tubes[static_cast<size_t>(members[a])],
                                     tubes[static_cast<size_t>(members[b])], batch_start, batch_end);
                if (phi > 0.0)
                    problem.pairs.push_back({static_cast<int>(a), static_cast<int>(b), phi});
            }
        }

        const MinimizeResult solved = minimize(problem, cfg.node_budget);

        BatchReport report;
        report.batch_start = batch_start;
        report.batch_end = batch_end;
        report.selection = solved.selection;
        report.energy = solved.energy;
        report.budget_exhausted = solved.budget_exhausted;
        for (size_t k = 0; k < members.size(); ++k) {
            report.tube_ids.push_back(tubes[static_cast<size_t>(members[k])].id);
            ++batches_touched[static_cast<size_t>(members[k])];
            if (solved.selection[k]) ++batches_selected[static_cast<size_t>(members[k])];
        }
        result.batches.push_back(std::move(report));
    }

    for (size_t i = 0; i < tubes.size(); ++i) {
        if (batches_touched[i] > 0 && batches_selected[i] == batches_touched[i])
            result.selected_ids.push_back(tubes[i].id);
    }
    return result;
}

}  // namespace tubes::coselect
