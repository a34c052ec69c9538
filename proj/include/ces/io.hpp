#pragma once

/*
/   Instance file format, version 1. One JSON object:
/
/     {
/       "version": 1,
/       "dims":    [d_1, ..., d_n],
/       "checks":  [ {"kind": "local", "support": [j, ...], "matrix": M}
/                  | {"kind": "factor", "factors": [M_1, ..., M_n]} , ... ],
/       "lambdas": [lambda_1, ..., lambda_r]
/     }
/
/   A matrix M is a row-major array of rows, each entry an [re, im] pair.
/   Support indices are 0-based and particle 0 is the most significant index
/   (big-endian), matching the in-memory convention. load_* checks structure
/   only; semantic validation (Hermiticity, commutation, spectra) is
/   instance::validate.
/
/   Witness file format, version 1, one object, tagged by "type":
/
/     {"version": 1, "type": "twolocal",
/      "isometries": [ {"particle": j, "isometry": M}, ... ]}
/
/     {"version": 1, "type": "projector_string",
/      "table": {"dims": [...], "cells": [[M, ...], ...], "lambdas": [...]},
/      "bits": [b_1, ..., b_n]}
/
/     {"version": 1, "type": "factorized",
/      "branch": [c_1, ..., c_n], "projector_string": <object above> | null}
/
/   The isometry list covers each particle exactly once, in any order.
*/

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ces/errors.hpp"
#include "ces/instance.hpp"
#include "ces/projectors2.hpp"
#include "ces/twolocal.hpp"

namespace ces::io {

using json = nlohmann::ordered_json;
using instance::CesInstance;
using instance::CheckKind;
using instance::CheckOperator;
using ces::ComplexMatrix;

inline json matrix_to_json(const ComplexMatrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline ComplexMatrix matrix_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw ParseError(where + ": matrix must be a non-empty array of rows");
    const std::size_t nrows = j.size();
    std::size_t ncols = 0;
    ComplexMatrix m;
    for (std::size_t i = 0; i < nrows; ++i) {
        const json& row = j[i];
        if (!row.is_array()) throw ParseError(where + ": row " + std::to_string(i) + " is not an array");
        if (i == 0) {
            ncols = row.size();
            if (ncols == 0) throw ParseError(where + ": empty matrix row");
            m.resize(nrows, ncols);
        } else if (row.size() != ncols) {
            throw ParseError(where + ": ragged matrix (row " + std::to_string(i) + ")");
        }
        for (std::size_t k = 0; k < ncols; ++k) {
            const json& e = row[k];
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                throw ParseError(where + ": entry (" + std::to_string(i) + "," +
                                 std::to_string(k) + ") is not an [re, im] pair");
            m(i, k) = Complex(e[0].get<double>(), e[1].get<double>());
        }
    }
    return m;
}

inline json check_to_json(const CheckOperator& c) {
    json jc;
    if (c.kind == CheckKind::Local) {
        jc["kind"] = "local";
        jc["support"] = c.support;
        jc["matrix"] = matrix_to_json(c.local);
    } else {
        jc["kind"] = "factor";
        json factors = json::array();
        for (const auto& f : c.factors) factors.push_back(matrix_to_json(f));
        jc["factors"] = std::move(factors);
    }
    return jc;
}

inline json instance_to_json(const CesInstance& x) {
    json out;
    out["version"] = 1;
    out["dims"] = x.dims;
    json checks = json::array();
    for (const auto& c : x.checks) checks.push_back(check_to_json(c));
    out["checks"] = std::move(checks);
    out["lambdas"] = x.lambdas;
    return out;
}

inline CheckOperator check_from_json(const json& jc, const std::vector<int>& dims,
                                     const std::string& where) {
    if (!jc.is_object() || !jc.contains("kind") || !jc["kind"].is_string())
        throw ParseError(where + ": expected an object with a \"kind\"");
    std::string kind = jc["kind"].get<std::string>();
    if (kind == "local") {
        if (!jc.contains("support") || !jc["support"].is_array())
            throw ParseError(where + ": missing \"support\" array");
        std::vector<int> support;
        for (const auto& s : jc["support"]) {
            if (!s.is_number_integer())
                throw ParseError(where + ": support entries must be integers");
            long v = s.get<long>();
            if (v < 0 || v >= static_cast<long>(dims.size()))
                throw ParseError(where + ": support index " + std::to_string(v) +
                                 " out of range");
            support.push_back(static_cast<int>(v));
        }
        if (!jc.contains("matrix")) throw ParseError(where + ": missing \"matrix\"");
        ComplexMatrix m = matrix_from_json(jc["matrix"], where);
        long expect = 1;
        for (int s : support) expect *= dims[s];
        if (m.rows() != m.cols() || m.rows() != expect)
            throw ParseError(where + ": matrix size does not match support dimensions");
        return CheckOperator::local_term(std::move(support), std::move(m));
    }
    if (kind == "factor") {
        if (!jc.contains("factors") || !jc["factors"].is_array() ||
            jc["factors"].size() != dims.size())
            throw ParseError(where + ": \"factors\" must list one matrix per particle");
        std::vector<ComplexMatrix> factors;
        for (std::size_t p = 0; p < dims.size(); ++p) {
            ComplexMatrix f =
                matrix_from_json(jc["factors"][p], where + " factor " + std::to_string(p));
            if (f.rows() != f.cols() || f.rows() != dims[p])
                throw ParseError(where + ": factor " + std::to_string(p) +
                                 " has the wrong shape");
            factors.push_back(std::move(f));
        }
        return CheckOperator::factor_row(std::move(factors));
    }
    throw ParseError(where + ": unknown kind \"" + kind + "\"");
}

inline CesInstance instance_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("top level: expected an object");
    if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != 1)
        throw ParseError("top level: missing or unsupported \"version\" (expected 1)");
    for (const char* key : {"dims", "checks", "lambdas"})
        if (!j.contains(key)) throw ParseError(std::string("top level: missing \"") + key + "\"");

    CesInstance x;
    if (!j["dims"].is_array() || j["dims"].empty())
        throw ParseError("\"dims\": expected a non-empty array");
    for (const auto& d : j["dims"]) {
        if (!d.is_number_integer() || d.get<long>() < 1)
            throw ParseError("\"dims\": entries must be integers >= 1");
        x.dims.push_back(d.get<int>());
    }
    if (x.total_dim() > instance::kMaxTotalDim)
        throw ParseError("\"dims\": total dimension exceeds " +
                         std::to_string(instance::kMaxTotalDim));

    if (!j["checks"].is_array()) throw ParseError("\"checks\": expected an array");
    for (std::size_t a = 0; a < j["checks"].size(); ++a)
        x.checks.push_back(
            check_from_json(j["checks"][a], x.dims, "check " + std::to_string(a)));

    if (!j["lambdas"].is_array() || j["lambdas"].size() != x.checks.size())
        throw ParseError("\"lambdas\": expected one number per check");
    for (const auto& l : j["lambdas"]) {
        if (!l.is_number()) throw ParseError("\"lambdas\": entries must be numbers");
        x.lambdas.push_back(l.get<double>());
    }
    return x;
}

inline CesInstance load_instance_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("JSON syntax: ") + e.what());
    }
    return instance_from_json(j);
}

inline CesInstance load_instance_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_instance_text(ss.str());
}

inline std::string save_instance_text(const CesInstance& x) {
    return instance_to_json(x).dump(2) + "\n";
}

inline void save_instance_file(const CesInstance& x, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    out << save_instance_text(x);
}

// ---------------------------------------------------------------------------
// Factor tables and witness files

inline json factor_table_to_json(const instance::FactorTable& t) {
    json out;
    out["dims"] = t.dims;
    json rows = json::array();
    for (const auto& row : t.cells) {
        json cells = json::array();
        for (const auto& cell : row) cells.push_back(matrix_to_json(cell));
        rows.push_back(std::move(cells));
    }
    out["cells"] = std::move(rows);
    out["lambdas"] = t.lambdas;
    return out;
}

inline instance::FactorTable factor_table_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected an object");
    for (const char* key : {"dims", "cells", "lambdas"})
        if (!j.contains(key)) throw ParseError(where + ": missing \"" + std::string(key) + "\"");
    instance::FactorTable t;
    if (!j["dims"].is_array() || j["dims"].empty())
        throw ParseError(where + ": \"dims\" must be a non-empty array");
    for (const auto& d : j["dims"]) {
        if (!d.is_number_integer() || d.get<long>() < 1)
            throw ParseError(where + ": \"dims\" entries must be integers >= 1");
        t.dims.push_back(d.get<int>());
    }
    if (!j["cells"].is_array()) throw ParseError(where + ": \"cells\" must be an array of rows");
    for (std::size_t a = 0; a < j["cells"].size(); ++a) {
        const json& row = j["cells"][a];
        std::string rw = where + " row " + std::to_string(a);
        if (!row.is_array() || row.size() != t.dims.size())
            throw ParseError(rw + ": expected one cell per particle");
        std::vector<ComplexMatrix> cells;
        for (std::size_t p = 0; p < t.dims.size(); ++p) {
            ComplexMatrix m = matrix_from_json(row[p], rw + " cell " + std::to_string(p));
            if (m.rows() != m.cols() || m.rows() != t.dims[p])
                throw ParseError(rw + ": cell " + std::to_string(p) + " has the wrong shape");
            cells.push_back(std::move(m));
        }
        t.cells.push_back(std::move(cells));
    }
    if (!j["lambdas"].is_array() || j["lambdas"].size() != t.cells.size())
        throw ParseError(where + ": expected one lambda per row");
    for (const auto& l : j["lambdas"]) {
        if (!l.is_number()) throw ParseError(where + ": lambdas must be numbers");
        t.lambdas.push_back(l.get<double>());
    }
    return t;
}

// A solver certificate in transit: exactly one of the three layouts from the
// header comment, tagged by type.
struct WitnessFile {
    std::string type;  // "twolocal" | "projector_string" | "factorized"
    twolocal::TwoLocalWitness two_local;
    projectors2::ProjectorTableWitness projector;
    bool has_projector = false;  // the factorized bundle's optional part
    std::vector<int> branch;
};

inline json projector_witness_to_json(const projectors2::ProjectorTableWitness& w) {
    json out;
    out["table"] = factor_table_to_json(w.table);
    out["bits"] = w.bits;
    return out;
}

inline projectors2::ProjectorTableWitness projector_witness_from_json(const json& j,
                                                                      const std::string& where) {
    if (!j.is_object() || !j.contains("table") || !j.contains("bits"))
        throw ParseError(where + ": expected \"table\" and \"bits\"");
    projectors2::ProjectorTableWitness w;
    w.table = factor_table_from_json(j["table"], where + " table");
    if (!j["bits"].is_array() || j["bits"].size() != w.table.dims.size())
        throw ParseError(where + ": \"bits\" must list one bit per particle");
    for (const auto& b : j["bits"]) {
        if (!b.is_number_integer() || (b.get<long>() != 0 && b.get<long>() != 1))
            throw ParseError(where + ": bits must be 0 or 1");
        w.bits.push_back(b.get<int>());
    }
    return w;
}

inline json witness_to_json(const WitnessFile& w) {
    json out;
    out["version"] = 1;
    out["type"] = w.type;
    if (w.type == "twolocal") {
        json list = json::array();
        for (std::size_t j = 0; j < w.two_local.isometries.size(); ++j) {
            json entry;
            entry["particle"] = j;
            entry["isometry"] = matrix_to_json(w.two_local.isometries[j]);
            list.push_back(std::move(entry));
        }
        out["isometries"] = std::move(list);
    } else if (w.type == "projector_string") {
        json inner = projector_witness_to_json(w.projector);
        out["table"] = std::move(inner["table"]);
        out["bits"] = std::move(inner["bits"]);
    } else if (w.type == "factorized") {
        out["branch"] = w.branch;
        out["projector_string"] =
            w.has_projector ? projector_witness_to_json(w.projector) : json(nullptr);
    } else {
        throw ParseError("witness type \"" + w.type + "\" is not serializable");
    }
    return out;
}

inline WitnessFile witness_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("witness: expected an object");
    if (!j.contains("version") || !j["version"].is_number_integer() ||
        j["version"].get<int>() != 1)
        throw ParseError("witness: missing or unsupported \"version\" (expected 1)");
    if (!j.contains("type") || !j["type"].is_string())
        throw ParseError("witness: missing \"type\"");
    WitnessFile w;
    w.type = j["type"].get<std::string>();
    if (w.type == "twolocal") {
        if (!j.contains("isometries") || !j["isometries"].is_array() || j["isometries"].empty())
            throw ParseError("witness: missing \"isometries\" list");
        const std::size_t n = j["isometries"].size();
        w.two_local.isometries.resize(n);
        std::vector<bool> seen(n, false);
        for (const auto& entry : j["isometries"]) {
            if (!entry.is_object() || !entry.contains("particle") ||
                !entry["particle"].is_number_integer() || !entry.contains("isometry"))
                throw ParseError("witness: each entry needs \"particle\" and \"isometry\"");
            long p = entry["particle"].get<long>();
            if (p < 0 || p >= static_cast<long>(n) || seen[p])
                throw ParseError("witness: isometries must cover each particle exactly once");
            seen[p] = true;
            w.two_local.isometries[p] =
                matrix_from_json(entry["isometry"], "isometry " + std::to_string(p));
        }
    } else if (w.type == "projector_string") {
        w.projector = projector_witness_from_json(j, "witness");
    } else if (w.type == "factorized") {
        if (!j.contains("branch") || !j["branch"].is_array())
            throw ParseError("witness: missing \"branch\" list");
        for (const auto& c : j["branch"]) {
            if (!c.is_number_integer() || c.get<long>() < 0)
                throw ParseError("witness: branch entries must be non-negative integers");
            w.branch.push_back(c.get<int>());
        }
        if (j.contains("projector_string") && !j["projector_string"].is_null()) {
            w.projector = projector_witness_from_json(j["projector_string"],
                                                      "witness projector_string");
            w.has_projector = true;
        }
    } else {
        throw ParseError("witness: unknown type \"" + w.type + "\"");
    }
    return w;
}

inline WitnessFile load_witness_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("JSON syntax: ") + e.what());
    }
    return witness_from_json(j);
}

inline void save_witness_file(const WitnessFile& w, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    out << witness_to_json(w).dump(2) << "\n";
}

}  // namespace ces::io
