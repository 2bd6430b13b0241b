#pragma once

#include "spv/formula.hpp"
#include "spv/term.hpp"

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace spv {

/// A disclosed-term set D together with the condition b under which it is
/// read; the adversary's knowledge is the closure of D under decomposition,
/// decryption with derivable keys, re-composition, re-encryption, and
/// b-equality.
struct Frame {
    std::vector<Term> disclosed;
    Formula cond;

    Frame() : cond(Formula::top()) {}
    Frame(std::vector<Term> d, Formula b);

    bool operator==(const Frame&) const = default;
    std::string str() const;
};

/// Decision procedure for membership in the closure of a frame. The closure
/// is infinite (arbitrary re-compositions), so it is never materialized; the
/// oracle answers queries and enumerates the finitely many structural
/// re-expressions of a term that the similarity bullets quantify over.
/// Queries may intern new terms but never add equalities, so cached analysis
/// results stay valid.
class ClosureOracle {
public:
    explicit ClosureOracle(Frame f);
    ~ClosureOracle();
    ClosureOracle(ClosureOracle&&) noexcept;
    ClosureOracle& operator=(ClosureOracle&&) noexcept;

    const Frame& frame() const { return frame_; }

    /// True iff the condition of the frame is unsatisfiable; every term is
    /// then in the closure.
    bool cond_false() const { return false_; }

    bool contains(const Term& e);

    /// Term equality under the frame's condition (true for everything when
    /// the condition is false).
    bool eq(const Term& a, const Term& b);

    /// True iff the congruence class of e contains the empty sequence.
    bool eq_epsilon(const Term& e);

    /// The constant the class of e is forced equal to, if any.
    std::optional<std::string> constant_of(const Term& e);

    /// All ways of reading e as a sequence of exactly n (>= 2) closure
    /// members: item vectors of sequence forms of e's class whose items are
    /// all derivable.
    std::vector<std::vector<Term>> seq_forms(const Term& e, std::size_t n);

    /// Longest sequence form of e's class (0 when none).
    std::size_t max_seq_len(const Term& e);

    /// All ways of reading e as an encryption whose key and body are both in
    /// the closure: (key, body) pairs.
    std::vector<std::pair<Term, Term>> enc_forms(const Term& e);

    /// Every ciphertext shape k(m) whose class is derivable from the frame
    /// (the messages an adversary could have obtained and may replay).
    std::vector<std::pair<Term, Term>> derivable_ciphertexts();

private:
    Frame frame_;
    bool false_ = false;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// True iff e is in the closure of the frame.
bool closure_contains(const Frame& f, const Term& e);

/// The finite analysis core of the frame: disclosed terms, their components,
/// bodies of ciphertexts whose key is derivable, and everything the condition
/// makes equal to one of those — saturated to a fixpoint. Every closure
/// member is synthesizable from this set by composition and encryption.
std::vector<Term> analysis_saturate(const Frame& f);

/// A candidate correspondence between two closures: finitely many term pairs
/// whose left components live in the left closure and right components in the
/// right closure.
struct Similarity {
    std::vector<std::pair<Term, Term>> pairs;
    Frame left;
    Frame right;
};

/// Checks the similarity conditions pair by pair: compatibility with
/// condition-equality on each side (functionality both ways), agreement on
/// being the empty sequence or a specific constant, and agreement of sequence
/// and encryption re-expressions with componentwise pairs present. If `why`
/// is given, it receives the first violated condition.
bool check_similarity(const Similarity& s, std::string* why = nullptr);

/// Extends the seed pairs to a full similarity by saturating the sequence and
/// encryption decomposition obligations, backtracking over the possible
/// alignments; returns nothing if every completion violates a condition.
std::optional<Similarity> find_similarity(const Frame& left, const Frame& right,
                                          const std::vector<std::pair<Term, Term>>& seed);

/// All ways the adversary can supply a message matching `pattern` to a
/// receiver holding frame `f`: each result is the constraint the exchange
/// imposes. Variables match anything (true); constants and compound
/// patterns must be derivable; encrypted patterns match every derivable
/// ciphertext (replay) and, when the pattern's key is derivable, any
/// adversary-built ciphertext. Constraints unsatisfiable together with the
/// frame's condition — treating `names` as pairwise-distinct fresh atoms —
/// are dropped. An unsatisfiable frame condition matches everything.
std::vector<Formula> match_candidates(const Frame& f, const Term& pattern,
                                      const std::set<std::string>& names = {});

}  // namespace spv
