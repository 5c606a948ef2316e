#include "schauder/grid_function.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace schauder {

namespace {

constexpr double kEdgeSlack = 1e-9;

void write_sidecar(const std::filesystem::path& path, const nlohmann::json& meta) {
  std::ofstream out(path.string() + ".json");
  out << meta.dump(2) << '\n';
}

nlohmann::json read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path.string() + ".json");
  if (!in) throw std::runtime_error("missing grid sidecar for " + path.string());
  return nlohmann::json::parse(in);
}

}  // namespace

GridFunction::GridFunction(int dim, double radius, double h, int margin)
    : dim_(dim), radius_(radius), h_(h), margin_(margin) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("grid dimension must be 1 or 2");
  if (!(radius > 0.0) || !(h > 0.0)) throw std::invalid_argument("grid radius and step must be positive");
  const double cells = 2.0 * radius / h;
  const double rounded = std::round(cells);
  if (std::abs(cells - rounded) > 1e-8 * std::max(1.0, cells))
    throw std::invalid_argument("mesh step must divide the diameter 2R exactly");
  n_ = static_cast<int>(rounded) + 1;
  if (n_ < 3) throw std::invalid_argument("mesh too coarse");
  const Eigen::Index total = dim == 1 ? n_ : static_cast<Eigen::Index>(n_) * n_;
  values_ = Eigen::VectorXd::Zero(total);
}

GridFunction GridFunction::sample(int dim, double radius, double h, const std::function<double(const Point&)>& fn) {
  GridFunction g(dim, radius, h, 0);
  for (Eigen::Index k = 0; k < g.size(); ++k)
    if (g.in_ball(k)) g.values_[k] = fn(g.point(k));
  return g;
}

GridFunction GridFunction::sample_like(const GridFunction& like, const std::function<double(const Point&)>& fn) {
  return sample(like.dim_, like.radius_, like.h_, fn);
}

Point GridFunction::point(Eigen::Index k) const {
  Point x(dim_);
  x[0] = coordinate(axis_index(k, 0));
  if (dim_ == 2) x[1] = coordinate(axis_index(k, 1));
  return x;
}

bool GridFunction::in_ball(Eigen::Index k) const {
  return point(k).norm() <= radius_ * (1.0 + kEdgeSlack);
}

double GridFunction::valid_radius() const { return radius_ - margin_ * h_ * std::sqrt(static_cast<double>(dim_)); }

bool GridFunction::valid(Eigen::Index k) const {
  return point(k).norm() <= valid_radius() + kEdgeSlack * radius_;
}

GridFunction GridFunction::with_margin(int margin) const {
  GridFunction g = *this;
  g.margin_ = margin;
  g.zero_invalid();
  return g;
}

bool GridFunction::same_mesh(const GridFunction& o) const {
  return dim_ == o.dim_ && n_ == o.n_ && std::abs(h_ - o.h_) <= 1e-12 * h_ &&
         std::abs(radius_ - o.radius_) <= 1e-12 * radius_;
}

GridFunction GridFunction::restrict_to(double radius) const {
  GridFunction g(dim_, radius, h_, 0);
  const int shift = static_cast<int>(std::lround((radius_ - radius) / h_));
  if (shift < 0) throw std::invalid_argument("restriction radius exceeds grid radius");
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    if (!g.in_ball(k)) continue;
    const int i = g.axis_index(k, 0) + shift;
    const int j = dim_ == 2 ? g.axis_index(k, 1) + shift : 0;
    g.values_[k] = values_[index(i, j)];
  }
  g.margin_ = std::max(0, margin_ - shift);
  g.zero_invalid();
  return g;
}

GridFunction GridFunction::coarsen() const {
  if ((n_ - 1) % 2 != 0) throw std::invalid_argument("coarsening needs an even number of cells per axis");
  GridFunction g(dim_, radius_, 2.0 * h_, (margin_ + 1) / 2);
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const int i = 2 * g.axis_index(k, 0);
    const int j = dim_ == 2 ? 2 * g.axis_index(k, 1) : 0;
    g.values_[k] = values_[index(i, j)];
  }
  g.zero_invalid();
  return g;
}

void GridFunction::zero_invalid() {
  for (Eigen::Index k = 0; k < size(); ++k)
    if (!valid(k)) values_[k] = 0.0;
}

nlohmann::json GridFunction::metadata() const {
  return {{"N", dim_}, {"R", radius_}, {"h", h_}, {"margin", margin_}, {"points_per_axis", n_}};
}

void GridFunction::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << (dim_ == 1 ? "x,value\n" : "x,y,value\n");
  out << std::setprecision(17);
  for (Eigen::Index k = 0; k < size(); ++k) {
    const Point x = point(k);
    out << x[0] << ',';
    if (dim_ == 2) out << x[1] << ',';
    out << values_[k] << '\n';
  }
  write_sidecar(path, metadata());
}

void GridFunction::write_binary(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(values_.data()), static_cast<std::streamsize>(sizeof(double) * size()));
  write_sidecar(path, metadata());
}

GridFunction GridFunction::read_csv(const std::filesystem::path& path) {
  const auto meta = read_sidecar(path);
  GridFunction g(meta.at("N").get<int>(), meta.at("R").get<double>(), meta.at("h").get<double>(),
                 meta.at("margin").get<int>());
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated grid csv " + path.string());
    const auto pos = line.rfind(',');
    g.values_[k] = std::stod(line.substr(pos + 1));
  }
  return g;
}

GridFunction GridFunction::read_binary(const std::filesystem::path& path) {
  const auto meta = read_sidecar(path);
  GridFunction g(meta.at("N").get<int>(), meta.at("R").get<double>(), meta.at("h").get<double>(),
                 meta.at("margin").get<int>());
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char*>(g.values_.data()), static_cast<std::streamsize>(sizeof(double) * g.size()));
  if (!in) throw std::runtime_error("truncated grid file " + path.string());
  return g;
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
  if (!same_mesh(o)) throw std::invalid_argument("grid functions live on different meshes");
  values_ += o.values_;
  margin_ = std::max(margin_, o.margin_);
  zero_invalid();
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o) {
  if (!same_mesh(o)) throw std::invalid_argument("grid functions live on different meshes");
  values_ -= o.values_;
  margin_ = std::max(margin_, o.margin_);
  zero_invalid();
  return *this;
}

GridFunction& GridFunction::operator*=(double s) {
  values_ *= s;
  return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(double s, GridFunction a) { return a *= s; }

}  // namespace schauder
