#pragma once

#include "spv/formula.hpp"
#include "spv/knowledge.hpp"
#include "spv/term.hpp"

#include <compare>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace spv {

/// Raised by replicate when the unfolded product would exceed the configured
/// state limit.
struct BoundTooLarge : std::runtime_error {
    explicit BoundTooLarge(const std::string& what) : std::runtime_error(what) {}
};

/// A transition label: receive into a pattern, send a payload, or perform an
/// internal action guarded/recorded by a formula.
struct Action {
    enum class Kind { Input, Output, Internal };

    static Action input(Term channel, Term pattern);
    static Action output(Term channel, Term payload);
    static Action internal(Formula cond);

    Kind kind;
    Term channel;   // Input / Output
    Term payload;   // Input: pattern; Output: message
    Formula cond;   // Internal

    bool is_message() const { return kind != Kind::Internal; }

    bool operator==(const Action& other) const;
    std::strong_ordering operator<=>(const Action& other) const;

    std::string str() const;

private:
    Action() : channel(Term::epsilon()), payload(Term::epsilon()), cond(Formula::top()) {}
};

/// Variable occurrences of the action, with their key flags (the set X_a).
std::set<Term> var_terms(const Action& a);
std::set<Term> var_terms(const Term& t);
std::set<Term> var_terms(const Formula& f);

struct Transition {
    int from;
    Action act;
    int to;

    bool operator==(const Transition&) const = default;
};

/// An acyclic message-passing process graph: named states, an initial state,
/// labeled transitions, and the initial condition, disclosed set, and hidden
/// names. Construction validates the structural invariants (endpoints in
/// range, acyclicity, hidden names absent from the disclosed terms).
class Process {
public:
    Process(std::vector<std::string> state_names, int initial,
            std::vector<Transition> transitions, Formula init_cond, std::vector<Term> disclosed,
            std::set<std::string> hidden);

    /// The process with one state and no transitions.
    static Process zero(std::string state_name = "0");

    int state_count() const { return static_cast<int>(state_names_.size()); }
    const std::vector<std::string>& state_names() const { return state_names_; }
    const std::string& state_name(int s) const { return state_names_[s]; }
    int initial() const { return initial_; }
    const std::vector<Transition>& transitions() const { return transitions_; }
    const std::vector<int>& outgoing(int s) const { return outgoing_[s]; }
    const Formula& init_cond() const { return init_cond_; }
    const std::vector<Term>& disclosed() const { return disclosed_; }
    const std::set<std::string>& hidden() const { return hidden_; }
    Frame initial_frame() const { return Frame(disclosed_, init_cond_); }

    /// States in a topological order of the transition graph.
    const std::vector<int>& topo_order() const { return topo_; }

private:
    std::vector<std::string> state_names_;
    int initial_;
    std::vector<Transition> transitions_;
    std::vector<std::vector<int>> outgoing_;  // state -> transition indices
    Formula init_cond_;
    std::vector<Term> disclosed_;
    std::set<std::string> hidden_;
    std::vector<int> topo_;
};

/// Execution steps from knowledge (cond, disclosed) under the action, one
/// successor frame per way the action can fire. Messages require the channel
/// to be derivable and add the exchanged term to the disclosed set; a receive
/// forks into one successor per class of adversary-suppliable message that
/// matches the pattern, with the constraints that message imposes conjoined
/// onto the condition. Internal actions conjoin their formula and are stuck
/// when the result is unsatisfiable with the hidden names read as distinct
/// fresh atoms. Returns an empty vector when the step is undefined.
std::vector<Frame> step(const Frame& f, const Action& a,
                        const std::set<std::string>& hidden_names = {});

/// A node of the execution tree: the state reached, the knowledge (cond,
/// disclosed) accumulated along the path, and the hidden names that are still
/// secret at this point.
struct ExecNode {
    int state;
    Frame frame;
    std::set<std::string> hidden_remaining;
    std::vector<std::pair<Action, std::unique_ptr<ExecNode>>> children;
};

/// Unfolds the process into its (finite) execution tree: the root carries the
/// initial labels and each outgoing transition contributes one child per
/// successor frame of its step (so a receive with several matching message
/// classes forks into several children).
std::unique_ptr<ExecNode> exec_tree(const Process& p);

/// True iff from = to or a path of internal-action edges leads from `from` to
/// `to` within one tree (nodes are compared by identity).
bool tau_reach(const ExecNode& from, const ExecNode& to);

/// Prepends an action: fresh initial state, its variables disclosed.
Process prefix(const Action& a, const Process& p);

/// Nondeterministic choice: a fresh initial state duplicates both initial
/// states' outgoing transitions; all original states are kept.
Process choice(const Process& p1, const Process& p2);

/// Interleaving product. Every co-located output/input pair additionally
/// yields a diagonal internal transition equating channels and messages
/// (the synchronized exchange, not observable to the environment).
/// Variables of p2 colliding with variables of p1 are freshened
/// deterministically (x, x#2, x#3, … in encounter order) unless listed in
/// `shared`.
Process parallel(const Process& p1, const Process& p2,
                 const std::set<std::string>& shared = {});

/// Bounded replication: the parallel composition of n copies, the i-th copy's
/// variables renamed x -> x@i. Throws BoundTooLarge when the product would
/// exceed state_limit states.
Process replicate(const Process& p, int n, std::size_t state_limit = 100000);

/// Moves the given names from the disclosed set (as variable terms) to the
/// hidden set.
Process hide(const Process& p, const std::set<std::string>& names);

}  // namespace spv
