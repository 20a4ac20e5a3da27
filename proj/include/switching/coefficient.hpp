#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace switching {

/// Deterministic time-dependent coefficient from a small closed-form catalog.
///
/// Used for the switching costs, the termination costs/benefits and the
/// intercepts of the affine drivers. Every catalog member is C¹ on [0, T],
/// so it is an Itô process with zero diffusion part whose drift is the
/// time derivative. The derivative can be withheld (`has_derivative() ==
/// false`) to model a cost whose Itô decomposition is not supplied.
class CoefficientFunction {
public:
    enum class Kind { constant, exponential, polynomial };

    CoefficientFunction() = default;

    [[nodiscard]] static CoefficientFunction constant(double value) {
        return CoefficientFunction(Kind::constant, {value});
    }

    /// scale * exp(rate * t)
    [[nodiscard]] static CoefficientFunction exponential(double scale, double rate) {
        return CoefficientFunction(Kind::exponential, {scale, rate});
    }

    /// Σ coeffs[k] t^k
    [[nodiscard]] static CoefficientFunction polynomial(std::vector<double> coeffs) {
        if (coeffs.empty()) coeffs.push_back(0.0);
        return CoefficientFunction(Kind::polynomial, std::move(coeffs));
    }

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] const std::vector<double>& params() const { return params_; }
    [[nodiscard]] bool has_derivative() const { return has_derivative_; }

    [[nodiscard]] CoefficientFunction without_derivative() const {
        auto copy = *this;
        copy.has_derivative_ = false;
        return copy;
    }

    [[nodiscard]] double operator()(double t) const {
        switch (kind_) {
        case Kind::constant:
            return params_[0];
        case Kind::exponential:
            return params_[0] * std::exp(params_[1] * t);
        case Kind::polynomial: {
            double acc = 0.0;
            for (auto it = params_.rbegin(); it != params_.rend(); ++it) acc = acc * t + *it;
            return acc;
        }
        }
        return 0.0;
    }

    /// Drift of the Itô decomposition. Throws when the derivative was withheld.
    [[nodiscard]] double derivative(double t) const {
        if (!has_derivative_) throw std::logic_error("coefficient has no Ito data");
        switch (kind_) {
        case Kind::constant:
            return 0.0;
        case Kind::exponential:
            return params_[0] * params_[1] * std::exp(params_[1] * t);
        case Kind::polynomial: {
            double acc = 0.0;
            for (std::size_t k = params_.size() - 1; k >= 1; --k) acc = acc * t + static_cast<double>(k) * params_[k];
            return acc;
        }
        }
        return 0.0;
    }

    [[nodiscard]] bool is_zero() const {
        for (double p : kind_ == Kind::exponential ? std::vector<double>{params_[0]} : params_)
            if (p != 0.0) return false;
        return true;
    }

private:
    CoefficientFunction(Kind kind, std::vector<double> params) : kind_(kind), params_(std::move(params)) {}

    Kind kind_ = Kind::constant;
    std::vector<double> params_{0.0};
    bool has_derivative_ = true;
};

[[nodiscard]] inline std::string to_string(CoefficientFunction::Kind kind) {
    switch (kind) {
    case CoefficientFunction::Kind::constant: return "constant";
    case CoefficientFunction::Kind::exponential: return "exponential";
    case CoefficientFunction::Kind::polynomial: return "polynomial";
    }
    return "unknown";
}

}  // namespace switching
