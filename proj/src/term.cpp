#include "spv/term.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>
#include <utility>

namespace spv {

struct Term::Node {
    Kind kind;
    std::string name;            // Const / Var
    bool is_key = false;         // Var
    std::vector<Term> children;  // Enc: {key, body}; Seq: items
    std::size_t hash = 0;
};

namespace {

std::size_t node_hash(const Term::Node& n);

}  // namespace

namespace {

std::size_t combine(std::size_t seed, std::size_t v) {
    return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

}  // namespace

Term::Term(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Term Term::constant(std::string name) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Const;
    n->name = std::move(name);
    n->hash = node_hash(*n);
    return Term(std::move(n));
}

Term Term::variable(std::string name, bool is_key) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Var;
    n->name = std::move(name);
    n->is_key = is_key;
    n->hash = node_hash(*n);
    return Term(std::move(n));
}

Term Term::epsilon() {
    static const Term eps = [] {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Seq;
        n->hash = node_hash(*n);
        return Term(std::move(n));
    }();
    return eps;
}

Term Term::sequence(std::vector<Term> items) {
    // Flatten one level (items are themselves normal, so their sequences are
    // already flat) and absorb empty sequences.
    std::vector<Term> flat;
    flat.reserve(items.size());
    for (auto& it : items) {
        if (it.kind() == Kind::Seq) {
            for (const auto& sub : it.items()) flat.push_back(sub);
        } else {
            flat.push_back(std::move(it));
        }
    }
    if (flat.empty()) return epsilon();
    if (flat.size() == 1) return flat.front();
    auto n = std::make_shared<Node>();
    n->kind = Kind::Seq;
    n->children = std::move(flat);
    n->hash = node_hash(*n);
    return Term(std::move(n));
}

Term Term::encryption(Term key, Term body) {
    if (key.kind() != Kind::Var || !key.is_key_var()) {
        throw KeyPositionViolation("encryption key position requires a key variable, got " +
                                   key.str());
    }
    auto n = std::make_shared<Node>();
    n->kind = Kind::Enc;
    n->children.push_back(std::move(key));
    n->children.push_back(std::move(body));
    n->hash = node_hash(*n);
    return Term(std::move(n));
}

Term::Kind Term::kind() const { return node_->kind; }

const std::string& Term::name() const { return node_->name; }

bool Term::is_key_var() const { return node_->kind == Kind::Var && node_->is_key; }

const Term& Term::enc_key() const { return node_->children[0]; }

const Term& Term::enc_body() const { return node_->children[1]; }

const std::vector<Term>& Term::items() const { return node_->children; }

bool Term::is_epsilon() const {
    return node_->kind == Kind::Seq && node_->children.empty();
}

std::size_t Term::hash() const { return node_->hash; }

bool Term::operator==(const Term& other) const {
    return (*this <=> other) == std::strong_ordering::equal;
}

std::strong_ordering Term::operator<=>(const Term& other) const {
    if (node_ == other.node_) return std::strong_ordering::equal;
    const Node& a = *node_;
    const Node& b = *other.node_;
    if (auto c = static_cast<int>(a.kind) <=> static_cast<int>(b.kind); c != 0) return c;
    switch (a.kind) {
        case Kind::Const:
            return a.name <=> b.name;
        case Kind::Var:
            if (auto c = a.name <=> b.name; c != 0) return c;
            return a.is_key <=> b.is_key;
        case Kind::Enc:
        case Kind::Seq: {
            const auto& xs = a.children;
            const auto& ys = b.children;
            const std::size_t n = std::min(xs.size(), ys.size());
            for (std::size_t i = 0; i < n; ++i) {
                if (auto c = xs[i] <=> ys[i]; c != 0) return c;
            }
            return xs.size() <=> ys.size();
        }
    }
    return std::strong_ordering::equal;
}

std::string Term::str() const {
    std::ostringstream os;
    os << *this;
    return os.str();
}

std::ostream& operator<<(std::ostream& os, const Term& t) {
    switch (t.kind()) {
        case Term::Kind::Const:
            os << '\'' << t.name() << '\'';
            break;
        case Term::Kind::Var:
            os << t.name();
            break;
        case Term::Kind::Enc:
            os << t.enc_key() << '(' << t.enc_body() << ')';
            break;
        case Term::Kind::Seq: {
            os << '(';
            bool first = true;
            for (const auto& it : t.items()) {
                if (!first) os << ", ";
                first = false;
                os << it;
            }
            os << ')';
            break;
        }
    }
    return os;
}

namespace {

std::size_t node_hash(const Term::Node& n) {
    std::size_t h = combine(0x51a3u, static_cast<std::size_t>(n.kind));
    h = combine(h, std::hash<std::string>{}(n.name));
    h = combine(h, n.is_key ? 1u : 0u);
    for (const auto& c : n.children) h = combine(h, c.hash());
    return h;
}

}  // namespace

Term normalize(const Term& t) {
    switch (t.kind()) {
        case Term::Kind::Const:
        case Term::Kind::Var:
            return t;
        case Term::Kind::Enc:
            return Term::encryption(normalize(t.enc_key()), normalize(t.enc_body()));
        case Term::Kind::Seq: {
            std::vector<Term> items;
            items.reserve(t.items().size());
            for (const auto& it : t.items()) items.push_back(normalize(it));
            return Term::sequence(std::move(items));
        }
    }
    return t;
}

std::set<std::string> vars(const Term& t) {
    std::set<std::string> out;
    std::vector<Term> stack{t};
    while (!stack.empty()) {
        Term cur = stack.back();
        stack.pop_back();
        switch (cur.kind()) {
            case Term::Kind::Var:
                out.insert(cur.name());
                break;
            case Term::Kind::Enc:
                stack.push_back(cur.enc_key());
                stack.push_back(cur.enc_body());
                break;
            case Term::Kind::Seq:
                for (const auto& it : cur.items()) stack.push_back(it);
                break;
            case Term::Kind::Const:
                break;
        }
    }
    return out;
}

Term substitute(const Term& t, const Substitution& s) {
    switch (t.kind()) {
        case Term::Kind::Const:
            return t;
        case Term::Kind::Var: {
            auto it = s.find(t.name());
            return it == s.end() ? t : it->second;
        }
        case Term::Kind::Enc:
            return Term::encryption(substitute(t.enc_key(), s), substitute(t.enc_body(), s));
        case Term::Kind::Seq: {
            std::vector<Term> items;
            items.reserve(t.items().size());
            for (const auto& it : t.items()) items.push_back(substitute(it, s));
            return Term::sequence(std::move(items));
        }
    }
    return t;
}

}  // namespace spv
