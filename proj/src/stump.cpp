#include "skex/stump.hpp"

#include <string>

#include "skex/error.hpp"

namespace skex {

void StumpParams::validate() const {
    if (k_primitives < 0 || j_nodes < 0) throw InvalidParameter("negative stump dimensions");
    if (static_cast<int>(complement.size()) != k_primitives ||
        static_cast<int>(inter_select.size()) != k_primitives * j_nodes ||
        static_cast<int>(union_select.size()) != j_nodes)
        throw InvalidParameter("stump parameter sizes do not match K, J");
    auto check = [&](double v) {
        if (mode == StumpMode::Hard) {
            if (v != 0.0 && v != 1.0) throw InvalidParameter("hard stump entries must be 0 or 1");
        } else if (!(v >= 0.0 && v <= 1.0)) {
            throw InvalidParameter("soft stump entries must lie in [0,1]");
        }
    };
    for (double v : complement) check(v);
    for (double v : inter_select) check(v);
    for (double v : union_select) check(v);
}

StumpParams StumpParams::make(int k_primitives, int j_nodes, StumpMode mode) {
    StumpParams s;
    s.mode = mode;
    s.k_primitives = k_primitives;
    s.j_nodes = j_nodes;
    s.complement.assign(k_primitives, 0.0);
    s.inter_select.assign(static_cast<std::size_t>(k_primitives) * j_nodes, 0.0);
    s.union_select.assign(j_nodes, 0.0);
    return s;
}

StumpPointEval stump_evaluate_point(const StumpParams& stump, std::span<const double> occ_row) {
    int K = stump.k_primitives, J = stump.j_nodes;
    if (static_cast<int>(occ_row.size()) != K)
        throw InvalidParameter("occupancy row size " + std::to_string(occ_row.size()) +
                               " does not match K=" + std::to_string(K));

    StumpPointEval out;
    double comp[2];  // avoid a heap allocation for the common small-K path
    std::vector<double> comp_heap;
    double* oc = comp;
    if (K > 2) {
        comp_heap.resize(K);
        oc = comp_heap.data();
    }
    for (int k = 0; k < K; ++k) {
        double c = stump.complement[k];
        oc[k] = c * (1.0 - occ_row[k]) + (1.0 - c) * occ_row[k];
    }

    double best = 0.0;
    for (int j = 0; j < J; ++j) {
        double u = stump.union_select[j];
        if (stump.mode == StumpMode::Hard && u == 0.0) continue;
        double node = 1.0;
        int arg_k = -1;
        bool any_selected = false;
        for (int k = 0; k < K; ++k) {
            double s = stump.select(k, j);
            if (s > 0.0) any_selected = true;
            double v = 1.0 - s * (1.0 - oc[k]);
            if (v < node) {
                node = v;
                arg_k = k;
            }
        }
        if (stump.mode == StumpMode::Hard && !any_selected) continue;  // empty node
        double contrib = u * node;
        if (out.arg_j < 0 || contrib > best) {
            best = contrib;
            out.arg_j = j;
            out.arg_k = arg_k;
        }
    }
    out.value = out.arg_j >= 0 ? best : 0.0;
    return out;
}

std::vector<double> stump_evaluate(const StumpParams& stump, const OccupancyMatrix& O) {
    stump.validate();
    if (O.prims != stump.k_primitives)
        throw InvalidParameter("occupancy matrix has " + std::to_string(O.prims) +
                               " primitives, stump expects " + std::to_string(stump.k_primitives));
    std::vector<double> out(O.points);
    for (int i = 0; i < O.points; ++i) {
        std::span<const double> row(O.v.data() + static_cast<std::size_t>(i) * O.prims, O.prims);
        out[i] = stump_evaluate_point(stump, row).value;
    }
    return out;
}

StumpParams binarize(const StumpParams& stump, double threshold) {
    stump.validate();
    if (stump.mode != StumpMode::Soft) throw InvalidParameter("binarize expects a soft stump");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw InvalidParameter("binarize threshold must lie in (0,1)");
    StumpParams hard = stump;
    hard.mode = StumpMode::Hard;
    auto bin = [threshold](double& v) { v = v >= threshold ? 1.0 : 0.0; };
    for (double& v : hard.complement) bin(v);
    for (double& v : hard.inter_select) bin(v);
    for (double& v : hard.union_select) bin(v);
    return hard;
}

CsgNode extract_csg(const StumpParams& stump) {
    stump.validate();
    if (stump.mode != StumpMode::Hard) throw InvalidParameter("extract_csg expects a hard stump");

    std::vector<CsgNode> nodes;
    for (int j = 0; j < stump.j_nodes; ++j) {
        if (stump.union_select[j] != 1.0) continue;
        std::vector<int> positive, negative;
        for (int k = 0; k < stump.k_primitives; ++k) {
            if (stump.select(k, j) != 1.0) continue;
            (stump.complement[k] == 1.0 ? negative : positive).push_back(k);
        }
        if (positive.empty() && negative.empty()) continue;  // empty node

        auto prim = [](int k) {
            CsgNode p;
            p.kind = CsgNode::Kind::Primitive;
            p.primitive = k;
            return p;
        };
        CsgNode base;
        if (positive.empty()) {
            base.kind = CsgNode::Kind::Universe;
        } else if (positive.size() == 1) {
            base = prim(positive[0]);
        } else {
            base.kind = CsgNode::Kind::Intersection;
            for (int k : positive) base.children.push_back(prim(k));
        }
        if (negative.empty()) {
            nodes.push_back(std::move(base));
            continue;
        }
        CsgNode diff;
        diff.kind = CsgNode::Kind::Difference;
        diff.children.push_back(std::move(base));
        if (negative.size() == 1) {
            diff.children.push_back(prim(negative[0]));
        } else {
            CsgNode uni;
            uni.kind = CsgNode::Kind::Union;
            for (int k : negative) uni.children.push_back(prim(k));
            diff.children.push_back(std::move(uni));
        }
        nodes.push_back(std::move(diff));
    }

    if (nodes.empty()) return CsgNode{};  // empty-shape sentinel
    if (nodes.size() == 1) return std::move(nodes[0]);
    CsgNode root;
    root.kind = CsgNode::Kind::Union;
    root.children = std::move(nodes);
    return root;
}

bool csg_evaluate(const CsgNode& node, std::span<const unsigned char> prim_inside) {
    switch (node.kind) {
        case CsgNode::Kind::Empty:
            return false;
        case CsgNode::Kind::Universe:
            return true;
        case CsgNode::Kind::Primitive:
            return prim_inside[node.primitive] != 0;
        case CsgNode::Kind::Union:
            for (const CsgNode& c : node.children)
                if (csg_evaluate(c, prim_inside)) return true;
            return false;
        case CsgNode::Kind::Intersection:
            for (const CsgNode& c : node.children)
                if (!csg_evaluate(c, prim_inside)) return false;
            return true;
        case CsgNode::Kind::Difference:
            if (!csg_evaluate(node.children[0], prim_inside)) return false;
            for (std::size_t i = 1; i < node.children.size(); ++i)
                if (csg_evaluate(node.children[i], prim_inside)) return false;
            return true;
    }
    return false;
}

}  // namespace skex
