#pragma once

#include "spv/knowledge.hpp"
#include "spv/process.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spv {

/// Raised internally when a search runs out of budget; surfaced as a distinct
/// outcome, never as "not equivalent".
struct BudgetExhausted : std::runtime_error {
    explicit BudgetExhausted(const std::string& what) : std::runtime_error(what) {}
};

/// An assignment of knowledge (cond, disclosed) to a subset of the states.
/// Only transitions between labeled states are constrained; states outside
/// the map are out of scope.
struct StateLabeling {
    std::map<int, Frame> entries;

    bool has(int s) const { return entries.count(s) != 0; }
    const Frame& at(int s) const { return entries.at(s); }
};

/// Weakest forward propagation of (cond, disclosed) from the initial state:
/// a state's condition holds on every execution that reaches it, and its
/// disclosed set collects everything any such execution must have revealed.
/// States reachable by no feasible execution are left unlabeled; the initial
/// state always carries exactly the process's own (cond, disclosed).
StateLabeling synthesize_labeling(const Process& p);

/// Validates the propagation conditions on every transition between labeled
/// states: message edges need a derivable channel, a monotone condition, and
/// the grown disclosed set inside the target closure (receives are checked
/// under every way the environment could match the pattern); internal edges
/// need the conjoined condition to entail the target's and the disclosed set
/// to carry over. Transitions no execution can take (underivable channel,
/// unmatchable pattern, or a condition unsatisfiable with hidden names read
/// as distinct atoms) are vacuously fine. On failure, `why` receives the
/// offending transition and condition.
bool check_labeling(const Process& p, const StateLabeling& l, std::string* why = nullptr);

/// A certificate for observational equivalence: a relation on labeled states
/// with one similarity per related pair, monotone along matched transitions.
/// mu0 is the initial pair's similarity; its pairs all have the form (x, x)
/// for disclosed x common to both processes.
struct EquivalenceWitness {
    std::vector<std::pair<int, int>> relation;
    std::map<std::pair<int, int>, Similarity> similarities;
    StateLabeling labeling_left;
    StateLabeling labeling_right;
    std::vector<std::pair<Term, Term>> mu0;
};

/// Checks every witness condition: both labelings validate, the initial pair
/// is related, mu0 is the initial similarity and is an identity on common
/// disclosed terms, every pair's similarity checks out against the labeled
/// frames, and every feasible transition on either side is simulated by the
/// other (internal steps by internal paths; message steps by a same-direction
/// message on a channel equal to some mu0 identity, reachable through
/// internal paths, with the exchanged messages paired in the successor
/// similarity and the similarity growing along the way).
bool check_witness(const Process& p1, const Process& p2, const EquivalenceWitness& w,
                   std::string* why = nullptr);

enum class SearchOutcome { Found, NoWitnessFound, BudgetExhausted };

struct SearchResult {
    SearchOutcome outcome = SearchOutcome::NoWitnessFound;
    std::optional<EquivalenceWitness> witness;
    std::uint64_t explored = 0;
};

/// Backtracking construction of an equivalence witness, seeded with the
/// identity on common disclosed terms (retrying with the identity restricted
/// to message channels, which is the weakest seed the simulation conditions
/// can use). Deterministic; NoWitnessFound is inconclusive — the witness
/// conditions are sufficient, not necessary.
SearchResult search_witness(const Process& p1, const Process& p2, std::uint64_t budget);

/// A message edge removed by a reduction pass, with the knowledge frame that
/// justified the removal.
struct RemovedEdge {
    std::string from;
    Action act;
    std::string to;
    Frame at;
};

/// An edge dropped or pruned without a message-removal justification.
struct DroppedEdge {
    std::string from;
    Action act;
    std::string to;
};

/// What one reduction pass did: message edges removed because no execution
/// can take them (underivable channel or unmatchable receive pattern),
/// internal edges dropped as unsatisfiable, and the states/edges that became
/// unreachable and were deleted.
struct ReductionPass {
    std::vector<RemovedEdge> removed;
    std::vector<DroppedEdge> dropped_internal;
    std::vector<std::string> pruned_states;
    std::vector<DroppedEdge> pruned_edges;

    bool changed() const {
        return !removed.empty() || !dropped_internal.empty() || !pruned_states.empty() ||
               !pruned_edges.empty();
    }
};

enum class ReduceMode {
    Full,           // feasibility judged under the states' labeled conditions
    ConditionFree,  // feasibility judged under the trivial condition (weaker pass)
};

/// One reduction pass scoped to the labeled states: removes outgoing message
/// edges no execution can take and internal edges with unsatisfiable
/// conditions, then deletes everything unreachable from the initial state.
std::pair<Process, ReductionPass> reduce_pass(const Process& p, const StateLabeling& scope,
                                              ReduceMode mode = ReduceMode::Full);

/// Reduction to a fixpoint: the first pass uses the supplied labeling, later
/// passes re-propagate a fresh labeling over the shrunken graph.
Process reduce(const Process& p, const StateLabeling& l);

enum class Tri { True, False, Inconclusive };

/// Decides observational equivalence directly on the finite execution trees
/// by exhaustive relation search with memoization. Independent of the witness
/// machinery; the only routine entitled to answer "not equivalent".
/// Inconclusive only when the budget runs out.
Tri tree_equiv(const Process& p1, const Process& p2, std::uint64_t budget,
               std::string* evidence = nullptr);

}  // namespace spv
