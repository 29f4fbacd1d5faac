#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <memory>

namespace dcflr {

/// Uniform grid on [0, 1] carrying composite-trapezoid quadrature weights.
///
/// Every L2 inner product in the library goes through these weights, so the
/// grid is the one place where the continuum is discretized.
class Grid {
public:
    int size() const noexcept { return static_cast<int>(points_.size()); }
    const Eigen::VectorXd& points() const noexcept { return points_; }
    const Eigen::VectorXd& weights() const noexcept { return weights_; }
    double spacing() const noexcept { return 1.0 / (size() - 1); }

    bool operator==(const Grid& other) const noexcept { return size() == other.size(); }

private:
    friend std::shared_ptr<const Grid> make_uniform_grid(int size);
    Grid(Eigen::VectorXd points, Eigen::VectorXd weights)
        : points_(std::move(points)), weights_(std::move(weights)) {}

    Eigen::VectorXd points_;
    Eigen::VectorXd weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline constexpr int kDefaultGridSize = 257;

/// Equally spaced points with trapezoid weights (h/2 at the ends, h inside).
/// Throws invalid-argument unless size is odd and at least 3.
GridPtr make_uniform_grid(int size = kDefaultGridSize);

/// Throws grid-mismatch when the two grids differ.
void check_same_grid(const Grid& a, const Grid& b);

/// A function on [0, 1] sampled at the grid points.
class GridFunction {
public:
    GridFunction(GridPtr grid, Eigen::VectorXd values);

    static GridFunction zero(GridPtr grid);
    static GridFunction constant(GridPtr grid, double value);
    template <class F>
    static GridFunction sample(GridPtr grid, F&& f) {
        Eigen::VectorXd v(grid->size());
        for (int i = 0; i < grid->size(); ++i) v[i] = f(grid->points()[i]);
        return GridFunction(std::move(grid), std::move(v));
    }

    const Grid& grid() const noexcept { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    const Eigen::VectorXd& values() const noexcept { return values_; }
    int size() const noexcept { return static_cast<int>(values_.size()); }

    GridFunction operator+(const GridFunction& other) const;
    GridFunction operator-(const GridFunction& other) const;
    GridFunction operator*(double scale) const;

private:
    GridPtr grid_;
    Eigen::VectorXd values_;
};

/// Trapezoid approximation of the integral of f * g over [0, 1].
double l2_inner(const GridFunction& f, const GridFunction& g);
double l2_norm(const GridFunction& f);

/// Text format: a `# grid_function v1 G=<G>` header, then one `t value` line
/// per point, 17 significant digits.
void write_grid_function(std::ostream& out, const GridFunction& f);
GridFunction read_grid_function(std::istream& in);

} // namespace dcflr
