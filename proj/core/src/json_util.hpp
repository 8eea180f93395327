#pragma once

// Private helpers shared by the JSON readers and writers.

#include <string>

#include <Eigen/Dense>

#include "json.hpp"
#include "xfer/error.hpp"

namespace xfer::detail {

using json = nlohmann::json;

inline json matrix_to_json(const Eigen::MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

template <class Err = ConfigError>
Eigen::MatrixXd matrix_from_json(const json& j, const std::string& key) {
    if (!j.is_array()) throw Err(key + ": expected an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Eigen::MatrixXd(0, 0);
    if (!j[0].is_array()) throw Err(key + ": expected nested arrays");
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw Err(key + ": ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) throw Err(key + ": non-numeric entry");
            M(i, c) = v.get<double>();
        }
    }
    return M;
}

template <class Err = ConfigError>
Eigen::VectorXd vector_from_json(const json& j, const std::string& key) {
    if (!j.is_array()) throw Err(key + ": expected an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw Err(key + ": non-numeric entry");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

}  // namespace xfer::detail
