#include "dcflr/grid.hpp"

#include "dcflr/error.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace dcflr {

GridPtr make_uniform_grid(int size) {
    require(size >= 3 && size % 2 == 1, Errc::invalid_argument,
            "grid size must be odd and >= 3, got " + std::to_string(size));
    const double h = 1.0 / (size - 1);
    Eigen::VectorXd points(size);
    Eigen::VectorXd weights = Eigen::VectorXd::Constant(size, h);
    for (int i = 0; i < size; ++i) points[i] = i * h;
    points[size - 1] = 1.0;
    weights[0] = weights[size - 1] = 0.5 * h;
    return GridPtr(new Grid(std::move(points), std::move(weights)));
}

void check_same_grid(const Grid& a, const Grid& b) {
    require(a == b, Errc::grid_mismatch,
            "grid sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
}

GridFunction::GridFunction(GridPtr grid, Eigen::VectorXd values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    require(grid_ != nullptr, Errc::invalid_argument, "grid function without grid");
    require(values_.size() == grid_->size(), Errc::invalid_argument,
            "grid function has " + std::to_string(values_.size()) + " values for a grid of " +
                std::to_string(grid_->size()));
    require(values_.allFinite(), Errc::invalid_argument, "grid function values must be finite");
}

GridFunction GridFunction::zero(GridPtr grid) { return constant(std::move(grid), 0.0); }

GridFunction GridFunction::constant(GridPtr grid, double value) {
    const int n = grid->size();
    return GridFunction(std::move(grid), Eigen::VectorXd::Constant(n, value));
}

GridFunction GridFunction::operator+(const GridFunction& other) const {
    check_same_grid(*grid_, other.grid());
    return GridFunction(grid_, values_ + other.values_);
}

GridFunction GridFunction::operator-(const GridFunction& other) const {
    check_same_grid(*grid_, other.grid());
    return GridFunction(grid_, values_ - other.values_);
}

GridFunction GridFunction::operator*(double scale) const { return GridFunction(grid_, values_ * scale); }

double l2_inner(const GridFunction& f, const GridFunction& g) {
    check_same_grid(f.grid(), g.grid());
    const auto& w = f.grid().weights();
    double sum = 0.0;
    for (int i = 0; i < f.size(); ++i) sum += w[i] * f.values()[i] * g.values()[i];
    return sum;
}

double l2_norm(const GridFunction& f) { return std::sqrt(l2_inner(f, f)); }

void write_grid_function(std::ostream& out, const GridFunction& f) {
    out << "# grid_function v1 G=" << f.size() << '\n';
    out << std::setprecision(17);
    for (int i = 0; i < f.size(); ++i) out << f.grid().points()[i] << ' ' << f.values()[i] << '\n';
}

GridFunction read_grid_function(std::istream& in) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), Errc::parse_error, "line 1: missing header");
    const std::string prefix = "# grid_function v1 G=";
    require(line.rfind(prefix, 0) == 0, Errc::parse_error, "line 1: bad header '" + line + "'");
    int size = 0;
    try {
        size = std::stoi(line.substr(prefix.size()));
    } catch (const std::exception&) {
        fail(Errc::parse_error, "line 1: bad grid size");
    }
    GridPtr grid;
    try {
        grid = make_uniform_grid(size);
    } catch (const Error& e) {
        fail(Errc::parse_error, std::string("line 1: ") + e.what());
    }
    Eigen::VectorXd values(size);
    for (int i = 0; i < size; ++i) {
        const std::string where = "line " + std::to_string(i + 2);
        require(static_cast<bool>(std::getline(in, line)), Errc::parse_error, where + ": unexpected end of file");
        std::istringstream row(line);
        double t = 0.0, v = 0.0;
        require(static_cast<bool>(row >> t >> v), Errc::parse_error, where + ": expected 't value'");
        require(std::abs(t - grid->points()[i]) <= 1e-12, Errc::parse_error, where + ": point off the uniform grid");
        require(std::isfinite(v), Errc::parse_error, where + ": non-finite value");
        values[i] = v;
    }
    return GridFunction(std::move(grid), std::move(values));
}

} // namespace dcflr
