#include "spv/process.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <utility>

namespace spv {

Action Action::input(Term channel, Term pattern) {
    Action a;
    a.kind = Kind::Input;
    a.channel = std::move(channel);
    a.payload = std::move(pattern);
    return a;
}

Action Action::output(Term channel, Term payload) {
    Action a;
    a.kind = Kind::Output;
    a.channel = std::move(channel);
    a.payload = std::move(payload);
    return a;
}

Action Action::internal(Formula cond) {
    Action a;
    a.kind = Kind::Internal;
    a.cond = std::move(cond);
    return a;
}

bool Action::operator==(const Action& other) const {
    return (*this <=> other) == std::strong_ordering::equal;
}

std::strong_ordering Action::operator<=>(const Action& other) const {
    if (auto c = static_cast<int>(kind) <=> static_cast<int>(other.kind); c != 0) return c;
    if (auto c = channel <=> other.channel; c != 0) return c;
    if (auto c = payload <=> other.payload; c != 0) return c;
    return cond <=> other.cond;
}

std::string Action::str() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::Output:
            os << channel << " ! " << payload;
            break;
        case Kind::Input:
            os << channel << " ? " << payload;
            break;
        case Kind::Internal:
            os << '[' << cond << ']';
            break;
    }
    return os.str();
}

std::set<Term> var_terms(const Term& t) {
    std::set<Term> out;
    std::vector<Term> stack{t};
    while (!stack.empty()) {
        Term cur = stack.back();
        stack.pop_back();
        switch (cur.kind()) {
            case Term::Kind::Var:
                out.insert(cur);
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

std::set<Term> var_terms(const Formula& f) {
    std::set<Term> out;
    auto absorb = [&out](const Term& t) {
        auto vs = var_terms(t);
        out.insert(vs.begin(), vs.end());
    };
    for (const auto& a : f.atoms()) {
        if (a.kind() == Atom::Kind::Eq) {
            absorb(a.lhs());
            absorb(a.rhs());
        } else {
            absorb(a.member());
            for (const auto& t : a.pool()) absorb(t);
        }
    }
    return out;
}

std::set<Term> var_terms(const Action& a) {
    if (a.kind == Action::Kind::Internal) return var_terms(a.cond);
    std::set<Term> out = var_terms(a.channel);
    auto vs = var_terms(a.payload);
    out.insert(vs.begin(), vs.end());
    return out;
}

Process::Process(std::vector<std::string> state_names, int initial,
                 std::vector<Transition> transitions, Formula init_cond,
                 std::vector<Term> disclosed, std::set<std::string> hidden)
    : state_names_(std::move(state_names)),
      initial_(initial),
      init_cond_(std::move(init_cond)),
      disclosed_(std::move(disclosed)),
      hidden_(std::move(hidden)) {
    const int n = static_cast<int>(state_names_.size());
    if (n == 0) throw std::invalid_argument("process needs at least one state");
    if (initial_ < 0 || initial_ >= n) throw std::invalid_argument("initial state out of range");
    for (const auto& t : transitions) {
        if (t.from < 0 || t.from >= n || t.to < 0 || t.to >= n) {
            throw std::invalid_argument("transition endpoint out of range");
        }
    }
    // Drop exact duplicates, keeping first occurrences.
    for (auto& t : transitions) {
        if (std::find(transitions_.begin(), transitions_.end(), t) == transitions_.end()) {
            transitions_.push_back(std::move(t));
        }
    }
    std::sort(disclosed_.begin(), disclosed_.end());
    disclosed_.erase(std::unique(disclosed_.begin(), disclosed_.end()), disclosed_.end());

    for (const auto& t : disclosed_) {
        for (const auto& v : vars(t)) {
            if (hidden_.count(v)) {
                throw std::invalid_argument("hidden name " + v + " occurs in the disclosed set");
            }
        }
    }

    outgoing_.assign(n, {});
    std::vector<int> indeg(n, 0);
    for (int i = 0; i < static_cast<int>(transitions_.size()); ++i) {
        outgoing_[transitions_[i].from].push_back(i);
        ++indeg[transitions_[i].to];
    }
    // Kahn's algorithm with smallest-id tie-breaking: validates acyclicity and
    // fixes a deterministic topological order.
    std::vector<int> work = indeg;
    std::vector<bool> done(n, false);
    while (static_cast<int>(topo_.size()) < n) {
        int pick = -1;
        for (int s = 0; s < n; ++s) {
            if (!done[s] && work[s] == 0) {
                pick = s;
                break;
            }
        }
        if (pick < 0) throw std::invalid_argument("transition graph is cyclic");
        done[pick] = true;
        topo_.push_back(pick);
        for (int e : outgoing_[pick]) --work[transitions_[e].to];
    }
}

Process Process::zero(std::string state_name) {
    return Process({std::move(state_name)}, 0, {}, Formula::top(), {}, {});
}

std::vector<Frame> step(const Frame& f, const Action& a,
                        const std::set<std::string>& hidden_names) {
    switch (a.kind) {
        case Action::Kind::Internal: {
            Formula next = conjoin(f.cond, a.cond);
            if (!satisfiable_given_names(next, hidden_names)) return {};
            return {Frame(f.disclosed, std::move(next))};
        }
        case Action::Kind::Output: {
            if (!closure_contains(f, a.channel)) return {};
            auto d = f.disclosed;
            d.push_back(a.payload);
            return {Frame(std::move(d), f.cond)};
        }
        case Action::Kind::Input: {
            if (!closure_contains(f, a.channel)) return {};
            auto d = f.disclosed;
            d.push_back(a.payload);
            std::vector<Frame> out;
            for (const Formula& beta : match_candidates(f, a.payload, hidden_names))
                out.emplace_back(d, conjoin(f.cond, beta));
            return out;
        }
    }
    return {};
}

namespace {

std::set<std::string> still_hidden(const std::set<std::string>& hidden, const Frame& f) {
    std::set<std::string> out;
    ClosureOracle oracle(f);
    for (const auto& h : hidden) {
        if (!oracle.contains(Term::variable(h)) && !oracle.contains(Term::key(h))) out.insert(h);
    }
    return out;
}

std::unique_ptr<ExecNode> expand(const Process& p, int state, const Frame& frame) {
    auto node = std::make_unique<ExecNode>();
    node->state = state;
    node->frame = frame;
    node->hidden_remaining = still_hidden(p.hidden(), frame);
    for (int e : p.outgoing(state)) {
        const Transition& t = p.transitions()[e];
        for (Frame& next : step(frame, t.act, p.hidden()))
            node->children.emplace_back(t.act, expand(p, t.to, next));
    }
    return node;
}

}  // namespace

std::unique_ptr<ExecNode> exec_tree(const Process& p) {
    return expand(p, p.initial(), p.initial_frame());
}

bool tau_reach(const ExecNode& from, const ExecNode& to) {
    if (&from == &to) return true;
    for (const auto& [act, child] : from.children) {
        if (act.kind == Action::Kind::Internal && tau_reach(*child, to)) return true;
    }
    return false;
}

namespace {

std::set<std::string> process_var_names(const Process& p) {
    std::set<std::string> out;
    auto absorb = [&out](const std::set<Term>& ts) {
        for (const auto& t : ts) out.insert(t.name());
    };
    for (const auto& t : p.transitions()) absorb(var_terms(t.act));
    for (const auto& d : p.disclosed()) absorb(var_terms(d));
    absorb(var_terms(p.init_cond()));
    out.insert(p.hidden().begin(), p.hidden().end());
    return out;
}

// Whether the name ever occurs as a key variable anywhere in the process;
// renamed variables keep that flag so encryptions stay well-formed.
std::map<std::string, bool> key_flags(const Process& p) {
    std::map<std::string, bool> flags;
    auto absorb = [&flags](const std::set<Term>& ts) {
        for (const auto& t : ts) {
            auto [it, inserted] = flags.emplace(t.name(), t.is_key_var());
            if (!inserted) it->second = it->second || t.is_key_var();
        }
    };
    for (const auto& t : p.transitions()) absorb(var_terms(t.act));
    for (const auto& d : p.disclosed()) absorb(var_terms(d));
    absorb(var_terms(p.init_cond()));
    return flags;
}

Action substitute(const Action& a, const Substitution& s) {
    switch (a.kind) {
        case Action::Kind::Input:
            return Action::input(substitute(a.channel, s), substitute(a.payload, s));
        case Action::Kind::Output:
            return Action::output(substitute(a.channel, s), substitute(a.payload, s));
        case Action::Kind::Internal:
            return Action::internal(substitute(a.cond, s));
    }
    return a;
}

Process rename_vars(const Process& p, const std::map<std::string, std::string>& rename) {
    if (rename.empty()) return p;
    const auto flags = key_flags(p);
    Substitution sub;
    for (const auto& [from, to] : rename) {
        const auto it = flags.find(from);
        const bool is_key = it != flags.end() && it->second;
        sub.emplace(from, Term::variable(to, is_key));
    }
    std::vector<Transition> ts;
    ts.reserve(p.transitions().size());
    for (const auto& t : p.transitions()) ts.push_back({t.from, substitute(t.act, sub), t.to});
    std::vector<Term> disclosed;
    disclosed.reserve(p.disclosed().size());
    for (const auto& d : p.disclosed()) disclosed.push_back(substitute(d, sub));
    std::set<std::string> hidden;
    for (const auto& h : p.hidden()) {
        auto it = rename.find(h);
        hidden.insert(it == rename.end() ? h : it->second);
    }
    return Process(p.state_names(), p.initial(), std::move(ts),
                   substitute(p.init_cond(), sub), std::move(disclosed), std::move(hidden));
}

std::string fresh_state_name(const std::vector<std::string>& taken, std::string base) {
    while (std::find(taken.begin(), taken.end(), base) != taken.end()) base += "'";
    return base;
}

}  // namespace

Process prefix(const Action& a, const Process& p) {
    std::vector<std::string> names = p.state_names();
    names.push_back(fresh_state_name(names, "+" + p.state_name(p.initial())));
    const int fresh = static_cast<int>(names.size()) - 1;
    std::vector<Transition> ts = p.transitions();
    ts.push_back({fresh, a, p.initial()});
    std::vector<Term> disclosed = p.disclosed();
    for (const auto& v : var_terms(a)) disclosed.push_back(v);
    return Process(std::move(names), fresh, std::move(ts), p.init_cond(), std::move(disclosed),
                   p.hidden());
}

Process choice(const Process& p1, const Process& p2) {
    const int n1 = p1.state_count();
    std::vector<std::string> names = p1.state_names();
    for (const auto& n : p2.state_names()) names.push_back(fresh_state_name(names, n));
    names.push_back(
        fresh_state_name(names, p1.state_name(p1.initial()) + "+" + p2.state_name(p2.initial())));
    const int fresh = static_cast<int>(names.size()) - 1;

    std::vector<Transition> ts = p1.transitions();
    for (const auto& t : p2.transitions()) ts.push_back({t.from + n1, t.act, t.to + n1});
    for (int e : p1.outgoing(p1.initial())) {
        const Transition& t = p1.transitions()[e];
        ts.push_back({fresh, t.act, t.to});
    }
    for (int e : p2.outgoing(p2.initial())) {
        const Transition& t = p2.transitions()[e];
        ts.push_back({fresh, t.act, t.to + n1});
    }

    std::vector<Term> disclosed = p1.disclosed();
    disclosed.insert(disclosed.end(), p2.disclosed().begin(), p2.disclosed().end());
    std::set<std::string> hidden = p1.hidden();
    hidden.insert(p2.hidden().begin(), p2.hidden().end());
    return Process(std::move(names), fresh, std::move(ts),
                   conjoin(p1.init_cond(), p2.init_cond()), std::move(disclosed),
                   std::move(hidden));
}

Process parallel(const Process& p1, const Process& p2, const std::set<std::string>& shared) {
    // Freshen p2's colliding private variables deterministically.
    const auto names1 = process_var_names(p1);
    const auto names2 = process_var_names(p2);
    std::map<std::string, std::string> rename;
    std::set<std::string> taken = names1;
    taken.insert(names2.begin(), names2.end());
    auto consider = [&](const std::string& name) {
        if (rename.count(name) || !names1.count(name) || shared.count(name)) return;
        int i = 2;
        std::string cand;
        do {
            cand = name + "#" + std::to_string(i++);
        } while (taken.count(cand));
        taken.insert(cand);
        rename.emplace(name, cand);
    };
    for (const auto& t : p2.transitions()) {
        for (const auto& v : var_terms(t.act)) consider(v.name());
    }
    for (const auto& d : p2.disclosed()) {
        for (const auto& v : var_terms(d)) consider(v.name());
    }
    for (const auto& v : var_terms(p2.init_cond())) consider(v.name());
    for (const auto& h : p2.hidden()) consider(h);
    const Process q = rename_vars(p2, rename);

    const int n1 = p1.state_count();
    const int n2 = q.state_count();
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(n1) * n2);
    for (int i = 0; i < n1; ++i) {
        for (int j = 0; j < n2; ++j) names.push_back(p1.state_name(i) + q.state_name(j));
    }
    auto id = [n2](int i, int j) { return i * n2 + j; };

    std::vector<Transition> ts;
    for (const auto& t : p1.transitions()) {
        for (int j = 0; j < n2; ++j) ts.push_back({id(t.from, j), t.act, id(t.to, j)});
    }
    for (const auto& t : q.transitions()) {
        for (int i = 0; i < n1; ++i) ts.push_back({id(i, t.from), t.act, id(i, t.to)});
    }
    // Diagonals: a co-located send and receive synchronize; the exchange is
    // internal and equates channels and messages.
    auto diagonal = [](const Action& out, const Action& in) {
        return Action::internal(Formula::of(
            {Atom::eq(out.channel, in.channel), Atom::eq(out.payload, in.payload)}));
    };
    for (const auto& t1 : p1.transitions()) {
        if (t1.act.kind != Action::Kind::Output) continue;
        for (const auto& t2 : q.transitions()) {
            if (t2.act.kind != Action::Kind::Input) continue;
            ts.push_back({id(t1.from, t2.from), diagonal(t1.act, t2.act), id(t1.to, t2.to)});
        }
    }
    for (const auto& t1 : p1.transitions()) {
        if (t1.act.kind != Action::Kind::Input) continue;
        for (const auto& t2 : q.transitions()) {
            if (t2.act.kind != Action::Kind::Output) continue;
            ts.push_back({id(t1.from, t2.from), diagonal(t2.act, t1.act), id(t1.to, t2.to)});
        }
    }

    std::vector<Term> disclosed = p1.disclosed();
    disclosed.insert(disclosed.end(), q.disclosed().begin(), q.disclosed().end());
    std::set<std::string> hidden = p1.hidden();
    hidden.insert(q.hidden().begin(), q.hidden().end());
    return Process(std::move(names), id(p1.initial(), q.initial()), std::move(ts),
                   conjoin(p1.init_cond(), q.init_cond()), std::move(disclosed),
                   std::move(hidden));
}

Process replicate(const Process& p, int n, std::size_t state_limit) {
    if (n < 1) throw std::invalid_argument("replication bound must be at least 1");
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) {
        total *= static_cast<std::size_t>(p.state_count());
        if (total > state_limit) {
            throw BoundTooLarge("replication would need " + std::to_string(total) +
                                " states (limit " + std::to_string(state_limit) + ")");
        }
    }

    auto copy = [&p, n](int i) {
        std::map<std::string, std::string> rename;
        for (const auto& name : process_var_names(p)) {
            rename.emplace(name, name + "@" + std::to_string(i));
        }
        Process r = rename_vars(p, rename);
        if (n == 1) return r;
        std::vector<std::string> names;
        names.reserve(r.state_names().size());
        for (const auto& s : r.state_names()) names.push_back(s + "@" + std::to_string(i));
        return Process(std::move(names), r.initial(), r.transitions(), r.init_cond(),
                       r.disclosed(), r.hidden());
    };

    Process acc = copy(1);
    for (int i = 2; i <= n; ++i) acc = parallel(acc, copy(i));
    return acc;
}

Process hide(const Process& p, const std::set<std::string>& names) {
    std::vector<Term> disclosed;
    for (const auto& d : p.disclosed()) {
        if (d.kind() == Term::Kind::Var && names.count(d.name())) continue;
        disclosed.push_back(d);
    }
    std::set<std::string> hidden = p.hidden();
    hidden.insert(names.begin(), names.end());
    return Process(p.state_names(), p.initial(), p.transitions(), p.init_cond(),
                   std::move(disclosed), std::move(hidden));
}

}  // namespace spv
