#include "spv/protocol.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstring>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace spv {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Tokenization, shared by the DSL and the printed term/formula forms.
// ---------------------------------------------------------------------------

struct Token {
    enum class Kind { Ident, Number, Quoted, Punct, End };
    Kind kind = Kind::End;
    std::string text;
    int line = 1;
    int col = 1;
};

// In DSL mode '#' starts a comment; in printed mode it may occur inside the
// generated identifiers (x#2) and quoted constants are recognized.
std::vector<Token> lex(const std::string& src, bool printed_mode) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t j = 0; j < n; ++j) {
            if (src[i + j] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        i += n;
    };
    auto ident_continue = [&](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
               (printed_mode && (c == '@' || c == '#'));
    };
    while (i < src.size()) {
        char c = src[i];
        if (!printed_mode && c == '#') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (printed_mode && c == '\'') {
            std::size_t j = i + 1;
            while (j < src.size() && src[j] != '\'') ++j;
            if (j >= src.size()) throw ParseError("unterminated constant", line, col);
            out.push_back({Token::Kind::Quoted, src.substr(i + 1, j - i - 1), line, col});
            advance(j + 1 - i);
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            int l = line, co = col;
            std::size_t j = i;
            while (j < src.size() && ident_continue(src[j])) ++j;
            while (j < src.size() && src[j] == '\'') ++j;
            out.push_back({Token::Kind::Ident, src.substr(i, j - i), l, co});
            advance(j - i);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            int l = line, co = col;
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            out.push_back({Token::Kind::Number, src.substr(i, j - i), l, co});
            advance(j - i);
            continue;
        }
        if (std::strchr("(){},;:=&|", c)) {
            out.push_back({Token::Kind::Punct, std::string(1, c), line, col});
            advance(1);
            continue;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }
    out.push_back({Token::Kind::End, "", line, col});
    return out;
}

struct Cursor {
    const std::vector<Token>& toks;
    std::size_t pos = 0;

    const Token& peek() const { return toks[pos]; }
    const Token& get() { return toks[pos + 1 < toks.size() ? pos++ : pos]; }
    bool at_end() const { return peek().kind == Token::Kind::End; }

    bool accept(const std::string& text) {
        if (peek().text == text && peek().kind != Token::Kind::Quoted) {
            get();
            return true;
        }
        return false;
    }
    Token expect(const std::string& text) {
        if (!(peek().text == text && peek().kind != Token::Kind::Quoted))
            throw ParseError("expected '" + text + "', got '" + peek().text + "'",
                             peek().line, peek().col);
        return get();
    }
    Token expect_ident(const std::string& what) {
        if (peek().kind != Token::Kind::Ident)
            throw ParseError("expected " + what + ", got '" + peek().text + "'",
                             peek().line, peek().col);
        return get();
    }
};

// ---------------------------------------------------------------------------
// Printed term/formula forms (used by witness certificates).
// ---------------------------------------------------------------------------

bool is_key_name(const std::string& name, const std::set<std::string>& keys) {
    if (keys.count(name)) return true;
    // Freshened copies (k@1, k#2) keep their base name's role.
    std::size_t cut = name.find_first_of("@#");
    return cut != std::string::npos && keys.count(name.substr(0, cut));
}

Term parse_printed_term(Cursor& c, const std::set<std::string>& keys) {
    const Token& t = c.peek();
    if (t.kind == Token::Kind::Quoted) {
        c.get();
        return Term::constant(t.text);
    }
    if (t.kind == Token::Kind::Ident || t.kind == Token::Kind::Number) {
        std::string name = c.get().text;
        if (c.peek().text == "(" && c.peek().kind == Token::Kind::Punct) {
            c.expect("(");
            Term body = parse_printed_term(c, keys);
            c.expect(")");
            return Term::encryption(Term::key(name), body);
        }
        return Term::variable(name, is_key_name(name, keys));
    }
    if (t.text == "(") {
        c.expect("(");
        std::vector<Term> items;
        if (!c.accept(")")) {
            items.push_back(parse_printed_term(c, keys));
            while (c.accept(",")) items.push_back(parse_printed_term(c, keys));
            c.expect(")");
        }
        if (items.size() == 1) return items.front();
        return Term::sequence(std::move(items));
    }
    throw ParseError("expected a term, got '" + t.text + "'", t.line, t.col);
}

Atom parse_printed_atom(Cursor& c, const std::set<std::string>& keys) {
    c.expect("(");
    Term lhs = parse_printed_term(c, keys);
    if (c.accept("=")) {
        Term rhs = parse_printed_term(c, keys);
        c.expect(")");
        return Atom::eq(std::move(lhs), std::move(rhs));
    }
    if (c.peek().kind == Token::Kind::Ident && c.peek().text == "in") {
        c.get();
        c.expect("{");
        std::vector<Term> pool;
        if (!(c.peek().text == "}" && c.peek().kind == Token::Kind::Punct)) {
            pool.push_back(parse_printed_term(c, keys));
            while (c.accept(",")) pool.push_back(parse_printed_term(c, keys));
        }
        c.expect("}");
        c.expect(")");
        return Atom::in(std::move(lhs), std::move(pool));
    }
    throw ParseError("expected '=' or 'in' in atom, got '" + c.peek().text + "'",
                     c.peek().line, c.peek().col);
}

Formula parse_printed_formula(Cursor& c, const std::set<std::string>& keys) {
    if (c.peek().kind == Token::Kind::Ident && c.peek().text == "true") {
        c.get();
        return Formula::top();
    }
    std::vector<Atom> atoms;
    atoms.push_back(parse_printed_atom(c, keys));
    while (c.accept("&")) atoms.push_back(parse_printed_atom(c, keys));
    return Formula::of(std::move(atoms));
}

}  // namespace

Term term_from_string(const std::string& text, const std::set<std::string>& key_names) {
    std::vector<Token> toks = lex(text, true);
    Cursor c{toks};
    Term t = parse_printed_term(c, key_names);
    if (!c.at_end())
        throw ParseError("trailing input after term", c.peek().line, c.peek().col);
    return t;
}

Formula formula_from_string(const std::string& text, const std::set<std::string>& key_names) {
    std::vector<Token> toks = lex(text, true);
    Cursor c{toks};
    Formula f = parse_printed_formula(c, key_names);
    if (!c.at_end())
        throw ParseError("trailing input after formula", c.peek().line, c.peek().col);
    return f;
}

namespace {

// ---------------------------------------------------------------------------
// DSL parsing
// ---------------------------------------------------------------------------

enum class IdKind { Channel, Key, Var, Const };

struct Stmt {
    enum class Kind { Out, In, Assert, Cont };
    Kind kind = Kind::Out;
    std::string channel;
    Term term = Term::epsilon();
    Formula formula = Formula::top();
    std::string cont;
    int line = 0, col = 0;
};

struct AgentDef {
    std::string name;
    std::vector<Stmt> stmts;
    bool has_cont = false;
};

struct Comp {
    enum class Kind { Ref, Hide, Par, Choice, Repl };
    Kind kind = Kind::Ref;
    std::string ref;
    std::vector<std::string> names;  // hide
    std::vector<Comp> children;
    int count = 0;  // repl
    int line = 0, col = 0;
};

struct SourceFile {
    std::string name;
    std::map<std::string, IdKind> decls;
    std::set<std::string> channels, keys, vars, consts;
    std::string secret, observed;
    std::vector<AgentDef> agents;
    std::optional<Comp> system, modified, continuation;
};

class DslParser {
public:
    DslParser(const std::string& text) : toks_(lex(text, false)), c_{toks_} {}

    SourceFile parse_file() {
        SourceFile f;
        c_.expect("protocol");
        f.name = c_.expect_ident("protocol name").text;
        while (!c_.at_end()) {
            const Token& t = c_.peek();
            if (t.text == "channels" || t.text == "keys" || t.text == "vars" ||
                t.text == "consts") {
                parse_decl(f);
            } else if (t.text == "secret" || t.text == "observed") {
                Token key = c_.get();
                c_.expect(":");
                Token v = c_.expect_ident("variable name");
                (key.text == "secret" ? f.secret : f.observed) = v.text;
            } else if (t.text == "agent") {
                f.agents.push_back(parse_agent(f));
            } else if (t.text == "system" || t.text == "modified" ||
                       t.text == "continuation") {
                Token key = c_.get();
                c_.expect(":");
                Comp comp = parse_comp();
                auto& slot = key.text == "system"     ? f.system
                             : key.text == "modified" ? f.modified
                                                      : f.continuation;
                if (slot)
                    throw ParseError("duplicate '" + key.text + "' section", key.line,
                                     key.col);
                slot = std::move(comp);
            } else {
                throw ParseError("unexpected '" + t.text + "'", t.line, t.col);
            }
        }
        if (!f.system) {
            const Token& t = c_.peek();
            throw ParseError("missing 'system' section", t.line, t.col);
        }
        return f;
    }

private:
    void parse_decl(SourceFile& f) {
        Token kind = c_.get();
        c_.expect(":");
        IdKind k = kind.text == "channels" ? IdKind::Channel
                   : kind.text == "keys"   ? IdKind::Key
                   : kind.text == "vars"   ? IdKind::Var
                                           : IdKind::Const;
        while (true) {
            Token id = c_.expect_ident("identifier");
            if (f.decls.count(id.text))
                throw ParseError("duplicate declaration of '" + id.text + "'", id.line,
                                 id.col);
            if (k == IdKind::Const && id.text.find('\'') != std::string::npos)
                throw ParseError("constant names may not contain primes", id.line, id.col);
            f.decls.emplace(id.text, k);
            switch (k) {
                case IdKind::Channel: f.channels.insert(id.text); break;
                case IdKind::Key: f.keys.insert(id.text); break;
                case IdKind::Var: f.vars.insert(id.text); break;
                case IdKind::Const: f.consts.insert(id.text); break;
            }
            if (!c_.accept(",")) break;
        }
    }

    Term parse_term(const SourceFile& f) {
        const Token& t = c_.peek();
        if (t.text == "enc" && t.kind == Token::Kind::Ident) {
            c_.get();
            c_.expect("(");
            Token key = c_.expect_ident("key name");
            auto it = f.decls.find(key.text);
            if (it == f.decls.end())
                throw ParseError("undeclared identifier '" + key.text + "'", key.line,
                                 key.col);
            if (it->second != IdKind::Key)
                throw ParseError("key misuse: '" + key.text + "' is not a key", key.line,
                                 key.col);
            c_.expect(",");
            Term body = parse_term(f);
            c_.expect(")");
            return Term::encryption(Term::key(key.text), body);
        }
        if (t.kind == Token::Kind::Ident) {
            Token id = c_.get();
            auto it = f.decls.find(id.text);
            if (it == f.decls.end())
                throw ParseError("undeclared identifier '" + id.text + "'", id.line,
                                 id.col);
            switch (it->second) {
                case IdKind::Key: return Term::key(id.text);
                case IdKind::Const: return Term::constant(id.text);
                default: return Term::variable(id.text);
            }
        }
        if (t.text == "(") {
            c_.expect("(");
            std::vector<Term> items;
            if (!c_.accept(")")) {
                items.push_back(parse_term(f));
                while (c_.accept(",")) items.push_back(parse_term(f));
                c_.expect(")");
            }
            if (items.size() == 1) return items.front();
            return Term::sequence(std::move(items));
        }
        throw ParseError("expected a term, got '" + t.text + "'", t.line, t.col);
    }

    Formula parse_formula(const SourceFile& f) {
        if (c_.peek().text == "true" && c_.peek().kind == Token::Kind::Ident) {
            c_.get();
            return Formula::top();
        }
        std::vector<Atom> atoms;
        atoms.push_back(parse_atom(f));
        while (c_.accept("&")) atoms.push_back(parse_atom(f));
        return Formula::of(std::move(atoms));
    }

    Atom parse_atom(const SourceFile& f) {
        Term lhs = parse_term(f);
        if (c_.accept("=")) return Atom::eq(std::move(lhs), parse_term(f));
        if (c_.peek().text == "in" && c_.peek().kind == Token::Kind::Ident) {
            c_.get();
            c_.expect("{");
            std::vector<Term> pool;
            if (!(c_.peek().text == "}")) {
                pool.push_back(parse_term(f));
                while (c_.accept(",")) pool.push_back(parse_term(f));
            }
            c_.expect("}");
            return Atom::in(std::move(lhs), std::move(pool));
        }
        throw ParseError("expected '=' or 'in', got '" + c_.peek().text + "'",
                         c_.peek().line, c_.peek().col);
    }

    std::string parse_channel(const SourceFile& f) {
        Token id = c_.expect_ident("channel name");
        auto it = f.decls.find(id.text);
        if (it == f.decls.end())
            throw ParseError("undeclared identifier '" + id.text + "'", id.line, id.col);
        if (it->second != IdKind::Channel)
            throw ParseError("'" + id.text + "' is not a channel", id.line, id.col);
        return id.text;
    }

    AgentDef parse_agent(const SourceFile& f) {
        c_.expect("agent");
        AgentDef def;
        def.name = c_.expect_ident("agent name").text;
        c_.expect("{");
        while (!c_.accept("}")) {
            Token head = c_.expect_ident("statement");
            if (def.has_cont)
                throw ParseError("'cont' must be the last statement", head.line, head.col);
            Stmt s;
            s.line = head.line;
            s.col = head.col;
            if (head.text == "out" || head.text == "in") {
                s.kind = head.text == "out" ? Stmt::Kind::Out : Stmt::Kind::In;
                c_.expect("(");
                s.channel = parse_channel(f);
                c_.expect(",");
                s.term = parse_term(f);
                c_.expect(")");
            } else if (head.text == "assert") {
                s.kind = Stmt::Kind::Assert;
                c_.expect("(");
                s.formula = parse_formula(f);
                c_.expect(")");
            } else if (head.text == "cont") {
                s.kind = Stmt::Kind::Cont;
                s.cont = c_.expect_ident("continuation name").text;
                def.has_cont = true;
            } else {
                throw ParseError("unknown statement '" + head.text + "'", head.line,
                                 head.col);
            }
            c_.expect(";");
            def.stmts.push_back(std::move(s));
        }
        return def;
    }

    Comp parse_comp() {
        const Token& t = c_.peek();
        Comp comp;
        comp.line = t.line;
        comp.col = t.col;
        if (t.text == "hide") {
            c_.get();
            comp.kind = Comp::Kind::Hide;
            c_.expect("(");
            comp.names.push_back(c_.expect_ident("name").text);
            while (c_.accept(",")) comp.names.push_back(c_.expect_ident("name").text);
            c_.expect(")");
            c_.expect("{");
            comp.children.push_back(parse_comp());
            c_.expect("}");
            return comp;
        }
        if (t.text == "par") {
            c_.get();
            comp.kind = Comp::Kind::Par;
            c_.expect("(");
            comp.children.push_back(parse_comp());
            while (c_.accept(",")) comp.children.push_back(parse_comp());
            c_.expect(")");
            return comp;
        }
        if (t.text == "choice") {
            c_.get();
            comp.kind = Comp::Kind::Choice;
            c_.expect("{");
            comp.children.push_back(parse_comp());
            c_.expect("|");
            comp.children.push_back(parse_comp());
            while (c_.accept("|")) comp.children.push_back(parse_comp());
            c_.expect("}");
            return comp;
        }
        if (t.text == "repl") {
            c_.get();
            comp.kind = Comp::Kind::Repl;
            c_.expect("(");
            comp.children.push_back(parse_comp());
            c_.expect(",");
            Token n = c_.get();
            if (n.kind != Token::Kind::Number)
                throw ParseError("expected a replication count", n.line, n.col);
            comp.count = std::stoi(n.text);
            if (comp.count <= 0)
                throw ParseError("replication count must be positive", n.line, n.col);
            c_.expect(")");
            return comp;
        }
        comp.kind = Comp::Kind::Ref;
        comp.ref = c_.expect_ident("agent name").text;
        return comp;
    }

    std::vector<Token> toks_;
    Cursor c_;
};

// ---------------------------------------------------------------------------
// Elaboration: agent chains and compositions
// ---------------------------------------------------------------------------

void collect_consts(const Term& t, std::set<std::string>& out) {
    switch (t.kind()) {
        case Term::Kind::Const: out.insert(t.name()); break;
        case Term::Kind::Var: break;
        case Term::Kind::Enc:
            collect_consts(t.enc_key(), out);
            collect_consts(t.enc_body(), out);
            break;
        case Term::Kind::Seq:
            for (const Term& it : t.items()) collect_consts(it, out);
            break;
    }
}

void collect_consts(const Formula& f, std::set<std::string>& out) {
    for (const Atom& a : f.atoms()) {
        if (a.kind() == Atom::Kind::Eq) {
            collect_consts(a.lhs(), out);
            collect_consts(a.rhs(), out);
        } else {
            collect_consts(a.member(), out);
            for (const Term& t : a.pool()) collect_consts(t, out);
        }
    }
}

// Linear chain NAME0 -> NAME1 -> ...; a trailing `cont X` renames the final
// state to X. The agent initially discloses the channels it uses statically
// (not first bound by one of its own receives) and the constants it mentions.
Process build_agent(const AgentDef& def) {
    std::vector<std::string> states{def.name + "0"};
    std::vector<Transition> transitions;
    std::set<std::string> bound;
    std::set<std::string> static_channels;
    std::set<std::string> used_consts;
    int at = 0;
    std::string cont_name;
    for (const Stmt& s : def.stmts) {
        if (s.kind == Stmt::Kind::Cont) {
            cont_name = s.cont;
            continue;
        }
        Action a = Action::internal(Formula::top());
        switch (s.kind) {
            case Stmt::Kind::Out:
                a = Action::output(Term::variable(s.channel), s.term);
                if (!bound.count(s.channel)) static_channels.insert(s.channel);
                collect_consts(s.term, used_consts);
                break;
            case Stmt::Kind::In:
                a = Action::input(Term::variable(s.channel), s.term);
                if (!bound.count(s.channel)) static_channels.insert(s.channel);
                collect_consts(s.term, used_consts);
                for (const std::string& v : vars(s.term)) bound.insert(v);
                break;
            case Stmt::Kind::Assert:
                a = Action::internal(s.formula);
                collect_consts(s.formula, used_consts);
                break;
            case Stmt::Kind::Cont: break;
        }
        states.push_back(def.name + std::to_string(at + 1));
        transitions.push_back({at, a, at + 1});
        ++at;
    }
    if (!cont_name.empty()) states.back() = cont_name;
    std::vector<Term> disclosed;
    for (const std::string& ch : static_channels) disclosed.push_back(Term::variable(ch));
    for (const std::string& cn : used_consts) disclosed.push_back(Term::constant(cn));
    return Process(std::move(states), 0, std::move(transitions), Formula::top(),
                   std::move(disclosed), {});
}

std::set<std::string> process_names(const Process& p) {
    std::set<std::string> out;
    for (const Transition& t : p.transitions())
        for (const Term& v : var_terms(t.act)) out.insert(v.name());
    for (const Term& d : p.disclosed())
        for (const std::string& n : vars(d)) out.insert(n);
    for (const std::string& n : vars(p.init_cond())) out.insert(n);
    return out;
}

Process eval_comp(const Comp& comp, const std::map<std::string, Process>& agents,
                  const std::set<std::string>& shared, int replication_bound) {
    switch (comp.kind) {
        case Comp::Kind::Ref: {
            auto it = agents.find(comp.ref);
            if (it == agents.end())
                throw ParseError("undeclared agent '" + comp.ref + "'", comp.line,
                                 comp.col);
            return it->second;
        }
        case Comp::Kind::Hide: {
            Process inner = eval_comp(comp.children[0], agents, shared, replication_bound);
            return hide(inner, std::set<std::string>(comp.names.begin(), comp.names.end()));
        }
        case Comp::Kind::Par: {
            Process acc = eval_comp(comp.children[0], agents, shared, replication_bound);
            for (std::size_t i = 1; i < comp.children.size(); ++i)
                acc = parallel(acc,
                               eval_comp(comp.children[i], agents, shared,
                                         replication_bound),
                               shared);
            return acc;
        }
        case Comp::Kind::Choice: {
            Process acc = eval_comp(comp.children[0], agents, shared, replication_bound);
            for (std::size_t i = 1; i < comp.children.size(); ++i)
                acc = choice(acc, eval_comp(comp.children[i], agents, shared,
                                            replication_bound));
            return acc;
        }
        case Comp::Kind::Repl: {
            Process inner = eval_comp(comp.children[0], agents, shared, replication_bound);
            int n = replication_bound > 0 ? replication_bound : comp.count;
            return replicate(inner, n);
        }
    }
    throw ParseError("invalid composition", comp.line, comp.col);
}

std::string fresh_name(const std::string& base, const std::set<std::string>& taken) {
    if (!taken.count(base)) return base;
    for (int i = 2;; ++i) {
        std::string cand = base + "_" + std::to_string(i);
        if (!taken.count(cand)) return cand;
    }
}

Process default_continuation(const std::set<std::string>& taken) {
    std::string ch = fresh_name("c_p", taken);
    std::string done = fresh_name("done", taken);
    std::vector<Transition> tr{
        {0, Action::output(Term::variable(ch), Term::constant(done)), 1}};
    return Process({"P0", "P1"}, 0, std::move(tr), Formula::top(),
                   {Term::variable(ch), Term::constant(done)}, {});
}

}  // namespace

ProtocolSystem parse(const std::string& text, int replication_bound) {
    DslParser parser(text);
    SourceFile f = parser.parse_file();

    std::map<std::string, Process> agents;
    std::set<std::string> agents_with_cont;
    for (const AgentDef& def : f.agents) {
        if (agents.count(def.name))
            throw ParseError("duplicate agent '" + def.name + "'", 0, 0);
        agents.emplace(def.name, build_agent(def));
        if (def.has_cont) agents_with_cont.insert(def.name);
    }

    std::set<std::string> shared;
    shared.insert(f.channels.begin(), f.channels.end());
    shared.insert(f.keys.begin(), f.keys.end());
    shared.insert(f.vars.begin(), f.vars.end());

    Process system = eval_comp(*f.system, agents, shared, replication_bound);
    Process modified =
        f.modified ? eval_comp(*f.modified, agents, shared, replication_bound) : system;

    std::set<std::string> taken;
    taken.insert(shared.begin(), shared.end());
    taken.insert(f.consts.begin(), f.consts.end());
    Process continuation = default_continuation(taken);
    if (f.continuation) {
        if (f.continuation->kind == Comp::Kind::Ref &&
            agents_with_cont.count(f.continuation->ref))
            throw ParseError("cyclic definition: continuation '" + f.continuation->ref +
                                 "' itself ends in cont",
                             f.continuation->line, f.continuation->col);
        continuation = eval_comp(*f.continuation, agents, shared, replication_bound);
    }
    for (const std::string& n : process_names(continuation))
        if (system.hidden().count(n))
            throw ParseError("continuation mentions hidden name '" + n + "'", 0, 0);

    if (!f.secret.empty() && !f.decls.count(f.secret))
        throw ParseError("undeclared identifier '" + f.secret + "'", 0, 0);
    if (!f.observed.empty() && !f.decls.count(f.observed))
        throw ParseError("undeclared identifier '" + f.observed + "'", 0, 0);

    return ProtocolSystem{f.name,
                          std::move(agents),
                          std::move(system),
                          std::move(modified),
                          std::move(continuation),
                          f.secret,
                          f.observed,
                          f.channels,
                          f.keys,
                          f.vars,
                          f.consts,
                          text};
}

// ---------------------------------------------------------------------------
// Built-in case studies (identical to the sources shipped under protocols/)
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kHiddenChannelSrc = R"(protocol hidden_channel

channels: c
vars: x, y, y'
secret: x
observed: y

agent A {
  out(c, x);
}

agent B {
  in(c, y);
  cont P;
}

agent Bmod {
  in(c, y');
  assert(y' = x);
  cont P;
}

system: hide(c) { par(A, B) }
modified: hide(c) { par(A, Bmod) }
)";

constexpr const char* kTrustedChannelSrc = R"(protocol trusted_channel

channels: c_a, c_b, c
vars: x, y, y'
secret: x
observed: y

agent A {
  out(c_a, c);
  out(c, x);
}

agent T {
  in(c_a, c);
  out(c_b, c);
}

agent B {
  in(c_b, c);
  in(c, y);
  cont P;
}

agent Bmod {
  in(c_b, c);
  in(c, y');
  assert(y' = x);
  cont P;
}

system: hide(c, c_a, c_b) { par(A, T, B) }
modified: hide(c, c_a, c_b) { par(A, T, Bmod) }
)";

constexpr const char* kEncMessageSrc = R"(protocol enc_message

channels: c
keys: k
vars: x, y, y'
secret: x
observed: y

agent A {
  out(c, enc(k, x));
}

agent B {
  in(c, enc(k, y));
  cont P;
}

agent Bmod {
  in(c, enc(k, y'));
  assert(y' = x);
  cont P;
}

system: hide(k) { par(A, B) }
modified: hide(k) { par(A, Bmod) }
)";

constexpr const char* kWmfSrc = R"(protocol wmf

channels: c_a, c_b, c
keys: k, k_a, k_b, k_T, k_B
vars: x, y, y'
secret: x
observed: y

agent A {
  out(c_a, enc(k_a, k));
  out(c, enc(k, x));
}

agent T {
  in(c_a, enc(k_a, k_T));
  out(c_b, enc(k_b, k_T));
}

agent B {
  in(c_b, enc(k_b, k_B));
  in(c, enc(k_B, y));
  cont P;
}

agent Bmod {
  in(c_b, enc(k_b, k_B));
  in(c, enc(k_B, y'));
  assert(y' = x);
  cont P;
}

system: hide(k, k_a, k_b) { par(A, T, B) }
modified: hide(k, k_a, k_b) { par(A, T, Bmod) }
)";

const std::map<std::string, const char*>& builtin_sources() {
    static const std::map<std::string, const char*> sources{
        {"hidden_channel", kHiddenChannelSrc},
        {"trusted_channel", kTrustedChannelSrc},
        {"enc_message", kEncMessageSrc},
        {"wmf", kWmfSrc},
    };
    return sources;
}

}  // namespace

ProtocolSystem builtin(const std::string& name) {
    auto it = builtin_sources().find(name);
    if (it == builtin_sources().end()) throw UnknownProtocol(name);
    return parse(it->second);
}

const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names{"hidden_channel", "trusted_channel",
                                                "enc_message", "wmf"};
    return names;
}

std::string pretty_print(const ProtocolSystem& ps) { return ps.source; }

// ---------------------------------------------------------------------------
// Verification drivers
// ---------------------------------------------------------------------------

namespace {

struct Outcome {
    std::string verdict;  // holds | refuted | inconclusive
    std::string evidence;
    std::string witness_json;
    std::uint64_t explored = 0;
};

// Shared decision pipeline on two already-reduced graphs: witness search
// first, the execution-tree check as the tie-breaker.
Outcome establish(const Process& left, const Process& right, std::uint64_t budget) {
    Outcome out;
    SearchResult sr = search_witness(left, right, budget);
    out.explored = sr.explored;
    if (sr.outcome == SearchOutcome::Found) {
        out.verdict = "holds";
        out.evidence = "witness relates " + std::to_string(sr.witness->relation.size()) +
                       " state pairs";
        out.witness_json = witness_to_json(*sr.witness, left, right);
        return out;
    }
    std::string ev;
    switch (tree_equiv(left, right, budget, &ev)) {
        case Tri::True:
            out.verdict = "holds";
            out.evidence = "execution trees match directly";
            return out;
        case Tri::False:
            out.verdict = "refuted";
            out.evidence = ev;
            return out;
        case Tri::Inconclusive:
            out.verdict = "inconclusive";
            out.evidence = "budget exhausted";
            return out;
    }
    out.verdict = "inconclusive";
    return out;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

Term probe_term(const ProtocolSystem& ps, const std::string& name) {
    return ps.keys.count(name) ? Term::key(name) : Term::variable(name);
}

}  // namespace

std::pair<Process, Process> integrity_pair(const ProtocolSystem& ps) {
    Process left = reduce(ps.system, synthesize_labeling(ps.system));
    Process right = reduce(ps.modifiedSystem, synthesize_labeling(ps.modifiedSystem));
    return {std::move(left), std::move(right)};
}

VerificationReport verify_integrity(const ProtocolSystem& ps, std::uint64_t budget) {
    auto t0 = std::chrono::steady_clock::now();
    VerificationReport r;
    r.protocol = ps.name;
    r.property = "integrity";
    auto [left, right] = integrity_pair(ps);
    Outcome out = establish(left, right, budget);
    r.verdict = out.verdict;
    r.evidence = out.evidence;
    r.witness_json = out.witness_json;
    r.states_explored = out.explored;
    r.wall_ms = ms_since(t0);
    return r;
}

VerificationReport verify_secrecy(const ProtocolSystem& ps, std::uint64_t budget) {
    auto t0 = std::chrono::steady_clock::now();
    VerificationReport r;
    r.protocol = ps.name;
    r.property = "secrecy";
    if (ps.secret.empty() || ps.observed.empty()) {
        r.verdict = "inconclusive";
        r.evidence = "protocol declares no secret/observed variable";
        r.wall_ms = ms_since(t0);
        return r;
    }
    std::set<std::string> taken;
    taken.insert(ps.channels.begin(), ps.channels.end());
    taken.insert(ps.keys.begin(), ps.keys.end());
    taken.insert(ps.vars.begin(), ps.vars.end());
    taken.insert(ps.consts.begin(), ps.consts.end());
    const Term v1 = Term::constant(fresh_name("v1", taken));
    const Term v2 = Term::constant(fresh_name("v2", taken));

    // Premise: the continuation cannot tell the received values apart.
    Term y = probe_term(ps, ps.observed);
    Process pa = prefix(Action::internal(Formula::eq(y, v1)), ps.continuation);
    Process pb = prefix(Action::internal(Formula::eq(y, v2)), ps.continuation);
    Outcome premise = establish(reduce(pa, synthesize_labeling(pa)),
                                reduce(pb, synthesize_labeling(pb)), budget);
    r.states_explored += premise.explored;
    if (premise.verdict != "holds") {
        r.verdict = "inconclusive";
        r.evidence = "premise fails for the continuation: " + premise.evidence;
        r.wall_ms = ms_since(t0);
        return r;
    }

    // Conclusion: sessions carrying the two values are indistinguishable.
    Term x = probe_term(ps, ps.secret);
    Process sa = prefix(Action::internal(Formula::eq(x, v1)), ps.system);
    Process sb = prefix(Action::internal(Formula::eq(x, v2)), ps.system);
    Outcome conclusion = establish(reduce(sa, synthesize_labeling(sa)),
                                   reduce(sb, synthesize_labeling(sb)), budget);
    r.states_explored += conclusion.explored;
    r.verdict = conclusion.verdict;
    r.evidence = conclusion.evidence;
    r.witness_json = conclusion.witness_json;
    r.wall_ms = ms_since(t0);
    return r;
}

std::vector<std::pair<Process, ReductionPass>> run_reduction_trace(const ProtocolSystem& ps) {
    std::vector<std::pair<Process, ReductionPass>> trace;
    Process cur = ps.system;

    // Opening pass: judge only the initial state's outgoing edges by the
    // process's own (cond, disclosed).
    StateLabeling minimal;
    minimal.entries.emplace(cur.initial(), cur.initial_frame());
    {
        auto pass = reduce_pass(cur, minimal, ReduceMode::Full);
        if (pass.second.changed()) {
            cur = std::move(pass.first);
            trace.emplace_back(cur, std::move(pass.second));
        }
    }
    // Then alternate: condition-free passes over the whole labeled graph
    // until stable, then one condition-aware pass; repeat while anything
    // changes.
    bool progress = true;
    while (progress) {
        progress = false;
        while (true) {
            auto pass = reduce_pass(cur, synthesize_labeling(cur), ReduceMode::ConditionFree);
            if (!pass.second.changed()) break;
            cur = std::move(pass.first);
            trace.emplace_back(cur, std::move(pass.second));
            progress = true;
        }
        auto pass = reduce_pass(cur, synthesize_labeling(cur), ReduceMode::Full);
        if (pass.second.changed()) {
            cur = std::move(pass.first);
            trace.emplace_back(cur, std::move(pass.second));
            progress = true;
        }
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Rendering and serialization
// ---------------------------------------------------------------------------

namespace {

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

}  // namespace

std::string export_dot(const Process& p) {
    std::ostringstream os;
    os << "digraph process {\n  rankdir=LR;\n";
    for (int s = 0; s < p.state_count(); ++s) {
        os << "  \"" << dot_escape(p.state_name(s)) << "\" [shape="
           << (s == p.initial() ? "doublecircle" : "oval") << "];\n";
    }
    for (const Transition& t : p.transitions()) {
        os << "  \"" << dot_escape(p.state_name(t.from)) << "\" -> \""
           << dot_escape(p.state_name(t.to)) << "\" [label=\"" << dot_escape(t.act.str())
           << "\"];\n";
    }
    os << "}\n";
    return os.str();
}

std::string report_to_json(const VerificationReport& r) {
    json j;
    j["protocol"] = r.protocol;
    j["property"] = r.property;
    j["verdict"] = r.verdict;
    j["evidence"] = r.evidence;
    if (!r.witness_json.empty()) j["witness"] = json::parse(r.witness_json);
    j["stats"] = {{"states_explored", r.states_explored}, {"wall_ms", r.wall_ms}};
    return j.dump(2);
}

namespace {

json frame_to_json(const Frame& f) {
    json disclosed = json::array();
    for (const Term& t : f.disclosed) disclosed.push_back(t.str());
    return json{{"cond", f.cond.str()}, {"disclosed", disclosed}};
}

json labeling_to_json(const StateLabeling& l, const Process& p) {
    json j = json::object();
    for (const auto& [s, f] : l.entries) j[p.state_name(s)] = frame_to_json(f);
    return j;
}

Frame frame_from_json(const json& j, const std::set<std::string>& keys) {
    std::vector<Term> disclosed;
    for (const auto& t : j.at("disclosed"))
        disclosed.push_back(term_from_string(t.get<std::string>(), keys));
    return Frame(std::move(disclosed),
                 formula_from_string(j.at("cond").get<std::string>(), keys));
}

int state_id(const Process& p, const std::string& name) {
    for (int s = 0; s < p.state_count(); ++s)
        if (p.state_name(s) == name) return s;
    throw std::runtime_error("unknown state name: " + name);
}

}  // namespace

std::string witness_to_json(const EquivalenceWitness& w, const Process& left,
                            const Process& right) {
    json j;
    j["relation"] = json::array();
    for (const auto& [a, b] : w.relation)
        j["relation"].push_back({left.state_name(a), right.state_name(b)});
    j["mu0"] = json::array();
    for (const auto& [a, b] : w.mu0) j["mu0"].push_back({a.str(), b.str()});
    j["labelings"] = {{"left", labeling_to_json(w.labeling_left, left)},
                      {"right", labeling_to_json(w.labeling_right, right)}};
    j["similarities"] = json::array();
    for (const auto& [pr, sim] : w.similarities) {
        json pairs = json::array();
        for (const auto& [a, b] : sim.pairs) pairs.push_back({a.str(), b.str()});
        j["similarities"].push_back({{"left_state", left.state_name(pr.first)},
                                     {"right_state", right.state_name(pr.second)},
                                     {"pairs", pairs}});
    }
    return j.dump(2);
}

EquivalenceWitness witness_from_json(const std::string& text, const Process& left,
                                     const Process& right,
                                     const std::set<std::string>& key_names) {
    json j = json::parse(text);
    EquivalenceWitness w;
    for (const auto& pr : j.at("relation"))
        w.relation.emplace_back(state_id(left, pr.at(0).get<std::string>()),
                                state_id(right, pr.at(1).get<std::string>()));
    for (const auto& pr : j.at("mu0"))
        w.mu0.emplace_back(term_from_string(pr.at(0).get<std::string>(), key_names),
                           term_from_string(pr.at(1).get<std::string>(), key_names));
    for (const auto& [name, fr] : j.at("labelings").at("left").items())
        w.labeling_left.entries.emplace(state_id(left, name), frame_from_json(fr, key_names));
    for (const auto& [name, fr] : j.at("labelings").at("right").items())
        w.labeling_right.entries.emplace(state_id(right, name),
                                         frame_from_json(fr, key_names));
    for (const auto& sim : j.at("similarities")) {
        int a = state_id(left, sim.at("left_state").get<std::string>());
        int b = state_id(right, sim.at("right_state").get<std::string>());
        std::vector<std::pair<Term, Term>> pairs;
        for (const auto& pr : sim.at("pairs"))
            pairs.emplace_back(term_from_string(pr.at(0).get<std::string>(), key_names),
                               term_from_string(pr.at(1).get<std::string>(), key_names));
        if (!w.labeling_left.has(a) || !w.labeling_right.has(b))
            throw std::runtime_error("similarity references an unlabeled state");
        w.similarities.emplace(std::make_pair(a, b),
                               Similarity{std::move(pairs), w.labeling_left.at(a),
                                          w.labeling_right.at(b)});
    }
    return w;
}

}  // namespace spv
