#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koopnet/error.hpp"

namespace koopnet {

/// Default node labels "n0", "n1", ...
inline std::vector<std::string> default_labels(std::size_t n) {
    std::vector<std::string> labels;
    labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) labels.push_back("n" + std::to_string(i));
    return labels;
}

/// Time-ordered network observations: row t is the state at time t*dt,
/// column i is node i.
class SnapshotMatrix {
public:
    SnapshotMatrix() = default;

    SnapshotMatrix(Eigen::MatrixXd data, double dt, std::vector<std::string> labels = {})
        : data_(std::move(data)), dt_(dt), labels_(std::move(labels)) {
        validate();
    }

    [[nodiscard]] const Eigen::MatrixXd& data() const noexcept { return data_; }
    [[nodiscard]] double dt() const noexcept { return dt_; }
    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }

    [[nodiscard]] std::size_t steps() const noexcept { return static_cast<std::size_t>(data_.rows()); }
    [[nodiscard]] std::size_t nodes() const noexcept { return static_cast<std::size_t>(data_.cols()); }

    /// Label of node i; falls back to "n<i>" when no labels were given.
    [[nodiscard]] std::string label(std::size_t i) const {
        return labels_.empty() ? "n" + std::to_string(i) : labels_.at(i);
    }

    [[nodiscard]] std::vector<std::string> effective_labels() const {
        std::vector<std::string> out;
        out.reserve(nodes());
        for (std::size_t i = 0; i < nodes(); ++i) out.push_back(label(i));
        return out;
    }

    /// Rows [start, start + count) as a new matrix with the same dt and labels.
    [[nodiscard]] SnapshotMatrix slice(std::size_t start, std::size_t count) const {
        if (start + count > steps()) {
            throw ShapeError("snapshot slice [" + std::to_string(start) + ", " +
                             std::to_string(start + count) + ") exceeds " + std::to_string(steps()) +
                             " rows");
        }
        return SnapshotMatrix(data_.middleRows(static_cast<Eigen::Index>(start),
                                               static_cast<Eigen::Index>(count)),
                              dt_, labels_);
    }

private:
    void validate() const {
        if (data_.rows() < 2) {
            throw ShapeError("snapshot matrix needs at least 2 rows, got " + std::to_string(data_.rows()));
        }
        if (data_.cols() < 1) throw ShapeError("snapshot matrix needs at least 1 column");
        if (!(dt_ > 0.0) || !std::isfinite(dt_)) {
            throw ConfigError("snapshot dt must be positive and finite");
        }
        if (!data_.allFinite()) throw DomainError("snapshot matrix contains non-finite entries");
        if (!labels_.empty() && labels_.size() != static_cast<std::size_t>(data_.cols())) {
            throw ShapeError("got " + std::to_string(labels_.size()) + " labels for " +
                             std::to_string(data_.cols()) + " columns");
        }
    }

    Eigen::MatrixXd data_;
    double dt_ = 1.0;
    std::vector<std::string> labels_;
};

}  // namespace koopnet
