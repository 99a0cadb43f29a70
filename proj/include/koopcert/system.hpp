#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "koopcert/expr.hpp"
#include "koopcert/parse.hpp"

namespace koopcert {

struct SystemFileError : std::runtime_error {
    SystemFileError(std::string message, size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + std::move(message)),
          line(line) {}
    size_t line;
};

// A controlled discrete-time system given symbolically: one update expression
// per state, written over the declared state and input symbols.
struct SystemDef {
    std::vector<Symbol> states;
    std::vector<Symbol> inputs;
    std::vector<Expr> dynamics;  // dynamics[i] drives states[i]
    // original text of each row when the system came from user input; the
    // factored form evaluates numerically far better than the expanded
    // canonical polynomial, so simulation prefers it
    std::vector<std::string> dynamics_source;

    size_t state_dim() const { return states.size(); }
    size_t input_dim() const { return inputs.size(); }

    std::map<std::string, Symbol> symbol_map() const {
        std::map<std::string, Symbol> m;
        for (const auto& s : states) m.emplace(s.name, s);
        for (const auto& s : inputs) m.emplace(s.name, s);
        return m;
    }
};

// Builds a SystemDef from already-validated names and dynamics text.
// Symbol order follows declaration: states first, then inputs.
inline SystemDef make_system(const std::vector<std::string>& state_names,
                             const std::vector<std::string>& input_names,
                             const std::vector<std::string>& dynamics_text) {
    SystemDef sys;
    int order = 0;
    for (const auto& n : state_names) sys.states.push_back({n, SymbolKind::state, order++});
    for (const auto& n : input_names) sys.inputs.push_back({n, SymbolKind::input, order++});
    if (dynamics_text.size() != state_names.size())
        throw std::invalid_argument("make_system: one dynamics expression per state required");
    auto symbols = sys.symbol_map();
    for (const auto& text : dynamics_text) sys.dynamics.push_back(parse_expression(text, symbols));
    sys.dynamics_source = dynamics_text;
    return sys;
}

namespace detail {

inline bool valid_identifier(const std::string& s) {
    if (s.empty()) return false;
    if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return s != "sin" && s != "cos" && s != "exp";
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

// Identifiers of the form <input-name><digits> are reserved for the per-step
// input symbols of the N-step composition, so they may not be declared.
inline bool collides_with_step_names(const std::string& name,
                                     const std::vector<std::string>& input_names) {
    for (const auto& base : input_names) {
        if (name.size() <= base.size() || name.compare(0, base.size(), base) != 0) continue;
        bool all_digits = true;
        for (size_t i = base.size(); i < name.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(name[i]))) {
                all_digits = false;
                break;
            }
        if (all_digits) return true;
    }
    return false;
}

}  // namespace detail

// Parses the line-based system format:
//   state: x1 x2        (required, exactly once)
//   input: u            (optional or empty for autonomous systems)
//   dyn x1: x2^2 + x1 + u
//   # comment
inline SystemDef parse_system(std::istream& in) {
    std::vector<std::string> state_names, input_names;
    bool saw_states = false, saw_inputs = false;
    std::map<std::string, std::pair<std::string, size_t>> dyn_lines;  // state -> (text, line)
    std::vector<std::string> dyn_order;

    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string trimmed = line;
        auto b = trimmed.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        trimmed = trimmed.substr(b);

        if (trimmed.rfind("state:", 0) == 0) {
            if (saw_states) throw SystemFileError("duplicate state declaration", lineno);
            saw_states = true;
            state_names = detail::split_ws(trimmed.substr(6));
            if (state_names.empty()) throw SystemFileError("state list is empty", lineno);
        } else if (trimmed.rfind("input:", 0) == 0) {
            if (saw_inputs) throw SystemFileError("duplicate input declaration", lineno);
            saw_inputs = true;
            input_names = detail::split_ws(trimmed.substr(6));
        } else if (trimmed.rfind("dyn", 0) == 0 && trimmed.size() > 3 &&
                   (trimmed[3] == ' ' || trimmed[3] == '\t')) {
            auto colon = trimmed.find(':');
            if (colon == std::string::npos)
                throw SystemFileError("dyn line missing ':'", lineno);
            auto names = detail::split_ws(trimmed.substr(3, colon - 3));
            if (names.size() != 1)
                throw SystemFileError("dyn line must name exactly one state", lineno);
            if (dyn_lines.count(names[0]))
                throw SystemFileError("duplicate dynamics for state " + names[0], lineno);
            dyn_lines[names[0]] = {trimmed.substr(colon + 1), lineno};
            dyn_order.push_back(names[0]);
        } else {
            throw SystemFileError("unrecognized line: " + trimmed, lineno);
        }
    }

    if (!saw_states) throw SystemFileError("missing state declaration", lineno);

    std::map<std::string, int> seen;
    auto declare = [&](const std::string& n, size_t ln) {
        if (!detail::valid_identifier(n))
            throw SystemFileError("invalid identifier '" + n + "'", ln);
        if (seen.count(n)) throw SystemFileError("duplicate symbol '" + n + "'", ln);
        seen[n] = 1;
    };
    for (const auto& n : state_names) declare(n, 1);
    for (const auto& n : input_names) declare(n, 1);
    for (const auto& names : {state_names, input_names})
        for (const auto& n : names)
            if (detail::collides_with_step_names(n, input_names))
                throw SystemFileError(
                    "identifier '" + n + "' collides with reserved step-input names", 1);

    std::vector<std::string> dynamics_text;
    for (const auto& sname : state_names) {
        auto it = dyn_lines.find(sname);
        if (it == dyn_lines.end())
            throw SystemFileError("missing dynamics for state " + sname, lineno);
        dynamics_text.push_back(it->second.first);
    }
    for (const auto& name : dyn_order)
        if (std::find(state_names.begin(), state_names.end(), name) == state_names.end())
            throw SystemFileError("dynamics given for undeclared state " + name,
                                  dyn_lines[name].second);

    try {
        return make_system(state_names, input_names, dynamics_text);
    } catch (const ParseError& e) {
        throw SystemFileError(std::string("expression error: ") + e.what(), 0);
    }
}

inline SystemDef parse_system_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open system file: " + path);
    return parse_system(in);
}

inline SystemDef parse_system_string(const std::string& text) {
    std::istringstream is(text);
    return parse_system(is);
}

}  // namespace koopcert
