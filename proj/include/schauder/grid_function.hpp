#pragma once

#include "schauder/jet.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <string>

namespace schauder {

/// Values of a function on the uniform tensor mesh covering the closed ball
/// B(0, R) in R^N (N = 1 or 2).
///
/// Mesh nodes are x = -R + i h per axis, i = 0 .. n-1, with (n-1) h = 2R.
/// Storage is x-fastest. Nodes outside the ball, and nodes inside the margin
/// band of width margin * h * sqrt(N) next to the sphere, carry no information
/// and hold 0 so that the value array always stays finite.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(int dim, double radius, double h, int margin = 0);

  static GridFunction sample(int dim, double radius, double h, const std::function<double(const Point&)>& fn);
  /// Same mesh as `like`, margin 0, values fn(x) in the ball.
  static GridFunction sample_like(const GridFunction& like, const std::function<double(const Point&)>& fn);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] double radius() const { return radius_; }
  [[nodiscard]] double step() const { return h_; }
  [[nodiscard]] int margin() const { return margin_; }
  [[nodiscard]] int points_per_axis() const { return n_; }
  [[nodiscard]] Eigen::Index size() const { return values_.size(); }

  [[nodiscard]] const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  double& operator[](Eigen::Index k) { return values_[k]; }
  double operator[](Eigen::Index k) const { return values_[k]; }

  [[nodiscard]] Eigen::Index index(int i, int j = 0) const { return static_cast<Eigen::Index>(j) * n_ + i; }
  [[nodiscard]] int axis_index(Eigen::Index k, int axis) const {
    return axis == 0 ? static_cast<int>(k % n_) : static_cast<int>(k / n_);
  }
  [[nodiscard]] double coordinate(int i) const { return -radius_ + i * h_; }
  [[nodiscard]] Point point(Eigen::Index k) const;

  [[nodiscard]] bool in_ball(Eigen::Index k) const;
  /// Radius of the region where values are meaningful.
  [[nodiscard]] double valid_radius() const;
  [[nodiscard]] bool valid(Eigen::Index k) const;

  /// Same mesh, different margin; values outside the new valid region are zeroed.
  [[nodiscard]] GridFunction with_margin(int margin) const;
  [[nodiscard]] bool same_mesh(const GridFunction& o) const;

  /// Restriction to a smaller centered ball on the same step (nested meshes).
  [[nodiscard]] GridFunction restrict_to(double radius) const;
  /// Every other node (step 2h, same ball); needs an even number of cells per axis.
  [[nodiscard]] GridFunction coarsen() const;

  [[nodiscard]] nlohmann::json metadata() const;

  void write_csv(const std::filesystem::path& path) const;
  void write_binary(const std::filesystem::path& path) const;
  static GridFunction read_csv(const std::filesystem::path& path);
  static GridFunction read_binary(const std::filesystem::path& path);

  GridFunction& operator+=(const GridFunction& o);
  GridFunction& operator-=(const GridFunction& o);
  GridFunction& operator*=(double s);

 private:
  void zero_invalid();

  int dim_ = 1;
  double radius_ = 1.0;
  double h_ = 1.0;
  int n_ = 3;
  int margin_ = 0;
  Eigen::VectorXd values_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(double s, GridFunction a);

}  // namespace schauder
