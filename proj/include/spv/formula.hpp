#pragma once

#include "spv/term.hpp"

#include <compare>
#include <iosfwd>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace spv {

// Reserved for conjunctions that leave the supported fragment (e.g. a
// membership atom whose pool is not an explicit finite set). The Atom
// representation below makes this unreachable today; the type is part of the
// public contract so callers can already handle it.
struct UnsupportedFragment : std::runtime_error {
    explicit UnsupportedFragment(const std::string& what) : std::runtime_error(what) {}
};

/// Elementary formula: either an equation between two terms or membership of
/// a term in a finite pool of terms.
class Atom {
public:
    enum class Kind { Eq, In };

    /// Equation with the two sides stored in canonical (term-order) position.
    static Atom eq(Term lhs, Term rhs);
    /// Membership with the pool sorted and deduplicated.
    static Atom in(Term member, std::vector<Term> pool);

    Kind kind() const { return kind_; }
    const Term& lhs() const { return terms_[0]; }
    const Term& rhs() const { return terms_[1]; }
    const Term& member() const { return terms_[0]; }
    const std::vector<Term>& pool() const { return pool_; }

    bool operator==(const Atom& other) const;
    std::strong_ordering operator<=>(const Atom& other) const;

    std::string str() const;

private:
    Atom(Kind kind, std::vector<Term> terms, std::vector<Term> pool);
    Kind kind_;
    std::vector<Term> terms_;  // Eq: {lhs, rhs}; In: {member}
    std::vector<Term> pool_;   // In only
};

/// Conjunction of atoms in normal form.
///
/// Equations between two encryptions split into a key equation and a body
/// equation (ciphertexts under ideal encryption are equal exactly when key
/// and body are). Reflexive equations and memberships whose member occurs
/// verbatim in the pool are dropped; a membership in an empty pool collapses
/// the whole conjunction to the canonical false formula. Atoms are sorted and
/// deduplicated, so structurally equal formulas compare equal; semantic
/// equality is mutual entailment (see equivalent()).
class Formula {
public:
    /// The empty conjunction (true).
    static Formula top() { return Formula({}); }
    /// Canonical false formula: an equation between two distinct constants.
    static Formula falsum();
    static Formula of(std::vector<Atom> atoms);
    static Formula eq(Term lhs, Term rhs) { return of({Atom::eq(std::move(lhs), std::move(rhs))}); }

    const std::vector<Atom>& atoms() const { return atoms_; }
    bool is_top() const { return atoms_.empty(); }

    bool operator==(const Formula& other) const = default;
    std::strong_ordering operator<=>(const Formula& other) const = default;

    std::string str() const;

private:
    explicit Formula(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {}
    std::vector<Atom> atoms_;
};

std::ostream& operator<<(std::ostream& os, const Formula& f);

/// Conjunction of two formulas, re-normalized.
Formula conjoin(const Formula& b1, const Formula& b2);

/// True iff the formula is unsatisfiable in the free algebra: its congruence
/// closure equates two distinct constants, a constant with an encryption or
/// with a sequence of length >= 2, or forces two sequences of provably
/// different lengths (no variable items on either) to be equal.
bool is_false(const Formula& b);

/// True iff every model of b1 satisfies b2. Decided by congruence closure
/// over b1's equations with injective constructors (encryptions always
/// decompose; sequences decompose pointwise when both sides have determined
/// equal length). Membership goals hold when the member is derivable from the
/// pool under b1, or when b1 carries a matching membership atom.
bool entails(const Formula& b1, const Formula& b2);

/// True iff b1 and b2 entail each other.
bool equivalent(const Formula& b1, const Formula& b2);

/// True iff entails(b, {e1 = e2}).
bool eq_under(const Formula& b, const Term& e1, const Term& e2);

/// Satisfiability when the given names stand for pairwise-distinct fresh
/// atomic values: the formula must not equate two such names, or a name with
/// a constant, an encryption, or any sequence. Plain congruence
/// contradictions count as unsatisfiable as well.
bool satisfiable_given_names(const Formula& b, const std::set<std::string>& names);

std::set<std::string> vars(const Formula& f);
Formula substitute(const Formula& f, const Substitution& s);

}  // namespace spv
