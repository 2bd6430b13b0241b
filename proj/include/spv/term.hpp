#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace spv {

// Raised when a constructor or substitution would place anything other than a
// key variable in the key position of an encryption.
struct KeyPositionViolation : std::invalid_argument {
    explicit KeyPositionViolation(const std::string& what)
        : std::invalid_argument(what) {}
};

/// Immutable message term.
///
/// A term is a constant, a variable (optionally marked as a key variable), an
/// encryption `k(body)` whose key position may only hold a key variable, or a
/// flat sequence of terms. Terms are kept in normal form at all times:
/// sequences never nest, never contain the empty sequence, and never hold a
/// single element; the empty sequence `()` is the neutral element of
/// concatenation.
class Term {
public:
    enum class Kind { Const, Var, Enc, Seq };

    static Term constant(std::string name);
    static Term variable(std::string name, bool is_key = false);
    static Term key(std::string name) { return variable(std::move(name), true); }
    static Term sequence(std::vector<Term> items);
    static Term encryption(Term key, Term body);
    static Term epsilon();

    Kind kind() const;
    const std::string& name() const;          // Const and Var only
    bool is_key_var() const;                  // true only for key variables
    const Term& enc_key() const;              // Enc only
    const Term& enc_body() const;             // Enc only
    const std::vector<Term>& items() const;   // Seq only
    bool is_epsilon() const;

    bool operator==(const Term& other) const;
    std::strong_ordering operator<=>(const Term& other) const;

    std::string str() const;
    std::size_t hash() const;

    struct Node;  // defined in term.cpp

private:
    std::shared_ptr<const Node> node_;
    explicit Term(std::shared_ptr<const Node> node);
};

std::ostream& operator<<(std::ostream& os, const Term& t);

/// Maps variable names to replacement terms.
using Substitution = std::map<std::string, Term>;

/// Rebuilds a term bottom-up through the normalizing constructors. Terms
/// produced by the factory functions are already normal, so this is the
/// identity on them; it exists so externally assembled structures can be
/// brought into normal form and the invariant can be property-tested.
Term normalize(const Term& t);

/// Names of all variables occurring in the term, key variables included.
std::set<std::string> vars(const Term& t);

/// Applies a substitution simultaneously to every variable occurrence.
/// Throws KeyPositionViolation if a key position would end up holding
/// anything but a key variable.
Term substitute(const Term& t, const Substitution& s);

}  // namespace spv

template <>
struct std::hash<spv::Term> {
    std::size_t operator()(const spv::Term& t) const { return t.hash(); }
};
