#pragma once

#include <span>
#include <vector>

#include "skex/extrude.hpp"

namespace skex {

enum class StumpMode { Soft, Hard };

// Three-layer CSG structure over K primitive occupancies:
//   complement:   Oc_k = c_k (1 - O_k) + (1 - c_k) O_k
//   intersection: I_j  = min_k (1 - s_kj (1 - Oc_k))
//   union:        F    = max_j u_j I_j
// Soft entries live in [0,1]; hard entries are exactly 0 or 1, and a hard
// intersection node with no selected primitive is empty (excluded from the
// union) instead of the formula's neutral 1.
struct StumpParams {
    StumpMode mode = StumpMode::Soft;
    int k_primitives = 0;
    int j_nodes = 0;
    std::vector<double> complement;    // K
    std::vector<double> inter_select;  // K*J, entry (k,j) at k*J + j
    std::vector<double> union_select;  // J

    double select(int k, int j) const { return inter_select[static_cast<std::size_t>(k) * j_nodes + j]; }
    double& select(int k, int j) { return inter_select[static_cast<std::size_t>(k) * j_nodes + j]; }

    void validate() const;
    static StumpParams make(int k_primitives, int j_nodes, StumpMode mode = StumpMode::Soft);
};

struct StumpPointEval {
    double value = 0.0;
    int arg_j = -1;  // union argmax (-1 when no node contributes)
    int arg_k = -1;  // intersection argmin of that node
};

StumpPointEval stump_evaluate_point(const StumpParams& stump, std::span<const double> occ_row);
std::vector<double> stump_evaluate(const StumpParams& stump, const OccupancyMatrix& O);

// Entrywise >= threshold; threshold must lie strictly inside (0,1) and the
// input must be soft.
StumpParams binarize(const StumpParams& stump, double threshold = 0.5);

// CSG expression extracted from a hard stump. Difference nodes subtract
// children[1..] from children[0]; Universe only appears as the base of a
// complement-only node.
struct CsgNode {
    enum class Kind { Empty, Universe, Primitive, Union, Intersection, Difference };
    Kind kind = Kind::Empty;
    int primitive = -1;
    std::vector<CsgNode> children;
};

CsgNode extract_csg(const StumpParams& hard_stump);

// Boolean evaluation of a CSG tree given per-primitive inside flags.
bool csg_evaluate(const CsgNode& node, std::span<const unsigned char> prim_inside);

}  // namespace skex
