#pragma once

#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "koopcert/certifier.hpp"
#include "koopcert/koopman.hpp"

namespace koopcert {

using Json = nlohmann::ordered_json;

// Matrices are reported twice: exact rationals for verification, floats for
// readability.
inline Json matrix_json(const RationalMatrix& m) {
    Json rational = Json::array();
    Json floating = Json::array();
    for (size_t r = 0; r < m.rows(); ++r) {
        Json rrow = Json::array();
        Json frow = Json::array();
        for (size_t c = 0; c < m.cols(); ++c) {
            rrow.push_back(to_string(m.at(r, c)));
            frow.push_back(to_double(m.at(r, c)));
        }
        rational.push_back(rrow);
        floating.push_back(frow);
    }
    Json out;
    out["rows"] = m.rows();
    out["cols"] = m.cols();
    out["rational"] = rational;
    out["float"] = floating;
    return out;
}

inline Json exprs_json(const std::vector<Expr>& es) {
    Json out = Json::array();
    for (const auto& e : es) out.push_back(e.to_string());
    return out;
}

inline Json symbols_json(const std::vector<Symbol>& syms) {
    Json out = Json::array();
    for (const auto& s : syms) out.push_back(s.name);
    return out;
}

inline Json witness_json(const AffinityWitness& w) {
    Json out;
    out["iteration"] = w.iteration;
    out["component"] = w.component;
    out["expr_index"] = w.expr_index;
    out["symbol"] = w.symbol.name;
    out["partial"] = w.partial.to_string();
    return out;
}

inline Json cap_json(const CapStructure& cap) {
    Json out;
    out["n1"] = cap.n1;
    out["n2"] = cap.n2;
    out["coordinates"] = symbols_json(cap.coords);
    out["c"] = matrix_json(cap.c);
    out["d"] = matrix_json(cap.d);
    out["g"] = exprs_json(cap.g);
    out["h"] = exprs_json(cap.h);
    return out;
}

inline Json iterations_json(const std::vector<IterationRecord>& records) {
    Json out = Json::array();
    for (const auto& r : records) {
        Json item;
        item["index"] = r.index;
        item["subsystem_dim"] = r.subsystem_dim;
        item["b_rank"] = r.b_rank;
        item["flag"] = r.flag;
        item["note"] = r.note;
        out.push_back(item);
    }
    return out;
}

inline Json model_json(const KoopmanModel& model) {
    Json out;
    out["n_z"] = model.lifted_dim();
    out["lifting"] = exprs_json(model.lifting);
    out["a_k"] = matrix_json(model.a_k);
    out["b_k"] = matrix_json(model.b_k);
    out["c_k"] = matrix_json(model.c_k);
    out["exactness"] = model.exact ? "exact-rational" : "float";
    return out;
}

inline std::string matrix_to_text(const RationalMatrix& m) {
    std::ostringstream os;
    os << "[";
    for (size_t r = 0; r < m.rows(); ++r) {
        if (r > 0) os << "; ";
        for (size_t c = 0; c < m.cols(); ++c) {
            if (c > 0) os << ", ";
            os << m.at(r, c);
        }
    }
    os << "]";
    return os.str();
}

inline std::string matrix_to_float_text(const RationalMatrix& m) {
    std::ostringstream os;
    os << "[";
    for (size_t r = 0; r < m.rows(); ++r) {
        if (r > 0) os << "; ";
        for (size_t c = 0; c < m.cols(); ++c) {
            if (c > 0) os << ", ";
            os << to_double(m.at(r, c));
        }
    }
    os << "]";
    return os.str();
}

}  // namespace koopcert
