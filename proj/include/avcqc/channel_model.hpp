#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "avcqc/common.hpp"
#include "avcqc/operator_core.hpp"

namespace avcqc {

/// Classical-quantum channel: x |-> rho(x), all outputs on one space.
class CQChannel {
public:
    CQChannel(std::vector<std::string> inputs, std::vector<DensityOperator> states)
        : inputs_(std::move(inputs)), states_(std::move(states)) {
        if (inputs_.empty() || inputs_.size() != states_.size())
            raise(errc::dimension_mismatch, "channel needs one state per input");
        dim_ = states_.front().dim();
        for (const auto& s : states_)
            if (s.dim() != dim_)
                raise(errc::dimension_mismatch, "channel outputs must share a dimension");
    }

    int dim() const { return dim_; }
    int num_inputs() const { return static_cast<int>(inputs_.size()); }
    const std::vector<std::string>& inputs() const { return inputs_; }
    const DensityOperator& state(int x) const { return states_.at(x); }

private:
    std::vector<std::string> inputs_;
    std::vector<DensityOperator> states_;
    int dim_;
};

/// Arbitrarily varying classical-quantum channel: (x, s) |-> rho(x, s).
/// Labels are opaque strings; dense integer indices are assigned at load
/// and used in all inner loops.
class AVCQC {
public:
    AVCQC(std::vector<std::string> inputs, std::vector<std::string> states,
          std::vector<DensityOperator> table)
        : inputs_(std::move(inputs)), state_labels_(std::move(states)),
          table_(std::move(table)) {
        if (inputs_.empty() || state_labels_.empty())
            raise(errc::incomplete_index, "alphabets must be nonempty");
        if (table_.size() != inputs_.size() * state_labels_.size())
            raise(errc::incomplete_index, "state table incomplete");
        dim_ = table_.front().dim();
        for (const auto& s : table_)
            if (s.dim() != dim_)
                raise(errc::dimension_mismatch, "all states must share a dimension");
    }

    int dim() const { return dim_; }
    int num_inputs() const { return static_cast<int>(inputs_.size()); }
    int num_states() const { return static_cast<int>(state_labels_.size()); }
    const std::vector<std::string>& inputs() const { return inputs_; }
    const std::vector<std::string>& state_labels() const { return state_labels_; }

    const DensityOperator& state(int x, int s) const {
        return table_.at(static_cast<std::size_t>(x) * state_labels_.size() + s);
    }

private:
    std::vector<std::string> inputs_;
    std::vector<std::string> state_labels_;
    std::vector<DensityOperator> table_;  // x-major
    int dim_;
};

/// Stochastic map Q : X -> S; one simplex row per input symbol.
class ConditionalDistribution {
public:
    ConditionalDistribution(std::vector<std::string> x_labels,
                            std::vector<std::string> s_labels, RealMatrix rows)
        : x_labels_(std::move(x_labels)), s_labels_(std::move(s_labels)),
          rows_(std::move(rows)) {
        if (rows_.rows() != static_cast<Eigen::Index>(x_labels_.size()) ||
            rows_.cols() != static_cast<Eigen::Index>(s_labels_.size()))
            raise(errc::dimension_mismatch, "conditional distribution shape mismatch");
        for (Eigen::Index x = 0; x < rows_.rows(); ++x) {
            double sum = 0.0;
            for (Eigen::Index s = 0; s < rows_.cols(); ++s) {
                if (rows_(x, s) < -kTolTrace)
                    raise(errc::domain_error, "negative conditional probability");
                rows_(x, s) = std::max(rows_(x, s), 0.0);
                sum += rows_(x, s);
            }
            if (std::abs(sum - 1.0) > kTolTrace)
                raise(errc::trace_not_one,
                      "row " + std::to_string(x) + " sums to " + std::to_string(sum));
            rows_.row(x) /= sum;
        }
    }

    static ConditionalDistribution uniform(const AVCQC& w) {
        return ConditionalDistribution(
            w.inputs(), w.state_labels(),
            RealMatrix::Constant(w.num_inputs(), w.num_states(), 1.0 / w.num_states()));
    }

    const RealMatrix& rows() const { return rows_; }
    const std::vector<std::string>& x_labels() const { return x_labels_; }
    const std::vector<std::string>& s_labels() const { return s_labels_; }
    double operator()(int s, int x) const { return rows_(x, s); }

private:
    std::vector<std::string> x_labels_;
    std::vector<std::string> s_labels_;
    RealMatrix rows_;  // rows_(x, s) = Q(s|x)
};

using Word = std::vector<int>;  // dense symbol indices

/// n-fold output for codeword x and state sequence s.
inline DensityOperator output_state(const AVCQC& w, const Word& x_seq, const Word& s_seq) {
    if (x_seq.size() != s_seq.size())
        raise(errc::length_mismatch, "codeword and state sequence lengths differ");
    if (x_seq.empty()) raise(errc::length_mismatch, "empty sequences");
    checked_pow(w.dim(), static_cast<int>(x_seq.size()), dim_cap(),
                errc::dimension_overflow, "d^n");
    Matrix acc = w.state(x_seq[0], s_seq[0]).entries();
    for (std::size_t t = 1; t < x_seq.size(); ++t)
        acc = kron(acc, w.state(x_seq[t], s_seq[t]).entries());
    return make_density(acc);
}

/// Input-aware jammer average: x |-> sum_s Q(s|x) rho(x, s).
inline CQChannel double_bar(const AVCQC& w, const ConditionalDistribution& q) {
    if (q.x_labels() != w.inputs() || q.s_labels() != w.state_labels())
        raise(errc::alphabet_mismatch, "conditional distribution alphabets do not match channel");
    std::vector<DensityOperator> out;
    out.reserve(w.num_inputs());
    for (int x = 0; x < w.num_inputs(); ++x) {
        Matrix acc = Matrix::Zero(w.dim(), w.dim());
        for (int s = 0; s < w.num_states(); ++s)
            acc += q(s, x) * w.state(x, s).entries();
        out.push_back(make_density(acc));
    }
    return CQChannel(w.inputs(), std::move(out));
}

/// Input-independent jammer average: x |-> sum_s P(s) rho(x, s).
inline CQChannel bar(const AVCQC& w, const ProbabilityVector& p_s) {
    if (p_s.support() != w.state_labels())
        raise(errc::alphabet_mismatch, "state distribution alphabet does not match channel");
    RealMatrix rows(w.num_inputs(), w.num_states());
    for (int x = 0; x < w.num_inputs(); ++x)
        for (int s = 0; s < w.num_states(); ++s) rows(x, s) = p_s(s);
    return double_bar(w, ConditionalDistribution(w.inputs(), w.state_labels(), rows));
}

/// Embeds a classical AVC as diagonal states; all outputs commute.
inline AVCQC classical_embed(const std::map<std::string, RealMatrix>& matrices) {
    if (matrices.empty()) raise(errc::incomplete_index, "no transmission matrices");
    const RealMatrix& first = matrices.begin()->second;
    const Eigen::Index nx = first.rows(), ny = first.cols();
    std::vector<std::string> inputs, states;
    for (Eigen::Index x = 0; x < nx; ++x) inputs.push_back(std::to_string(x));
    for (const auto& [label, t] : matrices) {
        states.push_back(label);
        if (t.rows() != nx || t.cols() != ny)
            raise(errc::dimension_mismatch, "transmission matrices must share a shape");
        for (Eigen::Index x = 0; x < nx; ++x) {
            double sum = 0.0;
            for (Eigen::Index y = 0; y < ny; ++y) {
                if (t(x, y) < -kTolTrace)
                    raise(errc::not_stochastic, "negative entry in matrix " + label);
                sum += t(x, y);
            }
            if (std::abs(sum - 1.0) > kTolTrace)
                raise(errc::not_stochastic,
                      "row " + std::to_string(x) + " of matrix " + label +
                          " sums to " + std::to_string(sum));
        }
    }
    std::vector<DensityOperator> table;
    table.reserve(inputs.size() * states.size());
    for (Eigen::Index x = 0; x < nx; ++x)
        for (const auto& [label, t] : matrices) {
            Matrix rho = Matrix::Zero(ny, ny);
            for (Eigen::Index y = 0; y < ny; ++y)
                rho(y, y) = std::max(t(x, y), 0.0);
            rho /= rho.trace().real();
            table.push_back(make_density(rho));
        }
    return AVCQC(std::move(inputs), std::move(states), std::move(table));
}

namespace detail {

inline Complex parse_complex(const nlohmann::json& j, std::vector<std::string>& problems,
                             const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        problems.push_back(where + ": complex entries must be [re, im]");
        return {0.0, 0.0};
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

inline Matrix parse_matrix(const nlohmann::json& j, int dim,
                           std::vector<std::string>& problems, const std::string& where) {
    Matrix m = Matrix::Zero(dim, dim);
    if (!j.is_array() || static_cast<int>(j.size()) != dim) {
        problems.push_back(where + ": expected " + std::to_string(dim) + " rows");
        return m;
    }
    for (int r = 0; r < dim; ++r) {
        if (!j[r].is_array() || static_cast<int>(j[r].size()) != dim) {
            problems.push_back(where + ": row " + std::to_string(r) + " malformed");
            continue;
        }
        for (int c = 0; c < dim; ++c)
            m(r, c) = parse_complex(j[r][c], problems,
                                    where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
    return m;
}

}  // namespace detail

/// Parses and validates a channel spec. Collects every violation before
/// failing so a bad file is diagnosed in one pass.
inline AVCQC load_spec(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        raise(errc::schema_error, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) raise(errc::schema_error, "top level must be an object");

    if (j.contains("classical")) {
        for (const auto& [key, _] : j.items())
            if (key != "classical" && key != "matrices")
                raise(errc::schema_error, "unknown top-level key '" + key + "'");
        if (!j["classical"].is_boolean() || !j["classical"].get<bool>())
            raise(errc::schema_error, "'classical' must be true when present");
        if (!j.contains("matrices") || !j["matrices"].is_object() || j["matrices"].empty())
            raise(errc::schema_error, "'matrices' must be a nonempty object");
        std::map<std::string, RealMatrix> mats;
        for (const auto& [label, rows] : j["matrices"].items()) {
            if (!rows.is_array() || rows.empty() || !rows[0].is_array())
                raise(errc::schema_error, "matrix '" + label + "' must be an array of rows");
            const int nr = static_cast<int>(rows.size());
            const int nc = static_cast<int>(rows[0].size());
            RealMatrix t(nr, nc);
            for (int r = 0; r < nr; ++r) {
                if (!rows[r].is_array() || static_cast<int>(rows[r].size()) != nc)
                    raise(errc::schema_error, "matrix '" + label + "' is ragged");
                for (int c = 0; c < nc; ++c) {
                    if (!rows[r][c].is_number())
                        raise(errc::schema_error, "matrix '" + label + "' has a non-numeric entry");
                    t(r, c) = rows[r][c].get<double>();
                }
            }
            mats.emplace(label, std::move(t));
        }
        return classical_embed(mats);
    }

    static const std::vector<std::string> known = {"input_alphabet", "state_alphabet",
                                                   "dim", "states"};
    std::vector<std::string> problems;
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            raise(errc::schema_error, "unknown top-level key '" + key + "'");
    for (const auto& key : known)
        if (!j.contains(key)) problems.push_back("missing key '" + key + "'");
    if (!problems.empty()) {
        std::string msg;
        for (const auto& p : problems) msg += p + "; ";
        raise(errc::schema_error, msg);
    }

    std::vector<std::string> inputs, states;
    for (const auto& v : j["input_alphabet"]) inputs.push_back(v.get<std::string>());
    for (const auto& v : j["state_alphabet"]) states.push_back(v.get<std::string>());
    const int dim = j["dim"].get<int>();
    if (dim <= 0) raise(errc::schema_error, "dim must be positive");

    std::vector<std::string> missing;
    std::vector<std::string> density_problems;
    std::vector<DensityOperator> table;
    bool complete = true;
    for (const auto& x : inputs)
        for (const auto& s : states) {
            const std::string key = x + "|" + s;
            if (!j["states"].contains(key)) {
                missing.push_back(key);
                complete = false;
                continue;
            }
            std::vector<std::string> parse_problems;
            Matrix m = detail::parse_matrix(j["states"][key], dim, parse_problems,
                                            "states['" + key + "']");
            if (!parse_problems.empty()) {
                for (const auto& p : parse_problems) density_problems.push_back(p);
                complete = false;
                continue;
            }
            try {
                table.push_back(make_density(m));
            } catch (const Error& e) {
                density_problems.push_back("state (" + x + "," + s + "): " + e.what());
            }
        }
    for (const auto& [key, _] : j["states"].items()) {
        const auto bar_pos = key.find('|');
        const std::string x = key.substr(0, bar_pos);
        const std::string s = bar_pos == std::string::npos ? "" : key.substr(bar_pos + 1);
        if (std::find(inputs.begin(), inputs.end(), x) == inputs.end() ||
            std::find(states.begin(), states.end(), s) == states.end())
            raise(errc::schema_error, "states key '" + key + "' not in alphabets");
    }
    if (!missing.empty()) {
        std::string msg = "missing state entries:";
        for (const auto& k : missing) msg += " " + k;
        raise(errc::incomplete_index, msg);
    }
    if (!density_problems.empty()) {
        std::string msg;
        for (const auto& p : density_problems) msg += p + "; ";
        raise(errc::not_density, msg);
    }
    return AVCQC(std::move(inputs), std::move(states), std::move(table));
}

inline nlohmann::ordered_json channel_to_json(const AVCQC& w) {
    nlohmann::ordered_json j;
    j["input_alphabet"] = w.inputs();
    j["state_alphabet"] = w.state_labels();
    j["dim"] = w.dim();
    nlohmann::ordered_json states = nlohmann::ordered_json::object();
    for (int x = 0; x < w.num_inputs(); ++x)
        for (int s = 0; s < w.num_states(); ++s) {
            const Matrix& m = w.state(x, s).entries();
            nlohmann::ordered_json rows = nlohmann::ordered_json::array();
            for (int r = 0; r < w.dim(); ++r) {
                nlohmann::ordered_json row = nlohmann::ordered_json::array();
                for (int c = 0; c < w.dim(); ++c)
                    row.push_back({m(r, c).real(), m(r, c).imag()});
                rows.push_back(row);
            }
            states[w.inputs()[x] + "|" + w.state_labels()[s]] = rows;
        }
    j["states"] = states;
    return j;
}

}  // namespace avcqc
