#include <cmath>
#include <deque>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "bwm/error.hpp"
#include "bwm/laplacian.hpp"

namespace bwm::mesh {

std::vector<Vec3> reconstruct(const LaplacianOperator& laplacian, std::span<const Vec3> deltas,
                              const std::map<int, Vec3>& hard_constraints, const ReconstructOptions& options,
                              ReconstructReport* report) {
  const auto n = static_cast<int>(laplacian.vertex_count());
  const auto& rows = laplacian.rows();
  if (deltas.size() != rows.size()) fail(ErrorKind::Data, "reconstruct: one delta per Laplacian row required");
  if (hard_constraints.empty()) fail(ErrorKind::Numeric, "rank-deficient: constraints required");

  std::vector<int> column(n, -1);  // free vertex -> unknown index
  std::vector<bool> constrained(n, false);
  for (const auto& [v, p] : hard_constraints) {
    if (v < 0 || v >= n) fail(ErrorKind::Data, "constraint on vertex " + std::to_string(v) + " out of range");
    constrained[v] = true;
  }
  std::vector<const LaplacianRow*> free_rows;
  std::vector<int> delta_index;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (constrained[rows[r].vertex]) continue;
    column[rows[r].vertex] = static_cast<int>(free_rows.size());
    free_rows.push_back(&rows[r]);
    delta_index.push_back(static_cast<int>(r));
  }
  for (int v = 0; v < n; ++v) {
    if (!constrained[v] && column[v] < 0) {
      fail(ErrorKind::Data, "free vertex " + std::to_string(v) + " has no Laplacian row");
    }
  }

  std::vector<Vec3> out(n, Vec3::Zero());
  for (const auto& [v, p] : hard_constraints) out[v] = p;
  const auto unknowns = static_cast<int>(free_rows.size());
  if (unknowns == 0) return out;

  // Every free vertex must connect to a constraint through the row structure,
  // otherwise its translation is undetermined.
  {
    std::vector<std::vector<int>> adjacency(n);
    for (const auto* row : free_rows) {
      for (const auto& [col, w] : row->weights) {
        adjacency[row->vertex].push_back(col);
        adjacency[col].push_back(row->vertex);
      }
    }
    std::vector<bool> reached(constrained);
    std::deque<int> queue;
    for (const auto& [v, p] : hard_constraints) queue.push_back(v);
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      for (int u : adjacency[v]) {
        if (!reached[u]) {
          reached[u] = true;
          queue.push_back(u);
        }
      }
    }
    for (int v = 0; v < n; ++v) {
      if (!reached[v]) {
        fail(ErrorKind::Numeric, "rank-deficient: vertex " + std::to_string(v) + " is not connected to a constraint");
      }
    }
  }

  // Row system A x = b with unscaled cotangent rows; b_i = A_i * delta_i minus
  // the constrained columns.
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::MatrixXd b(unknowns, 3);
  for (int r = 0; r < unknowns; ++r) {
    const LaplacianRow& row = *free_rows[r];
    Vec3 rhs = row.area * deltas[delta_index[r]];
    triplets.emplace_back(r, r, row.diagonal);
    for (const auto& [col, w] : row.weights) {
      if (constrained[col]) {
        rhs -= w * hard_constraints.at(col);
      } else {
        triplets.emplace_back(r, column[col], w);
      }
    }
    b.row(r) = rhs.transpose();
  }
  Eigen::SparseMatrix<double> a(unknowns, unknowns);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();

  // Rows from different geometries make A asymmetric in general, so the
  // normal equations are factored instead.
  const Eigen::SparseMatrix<double> at = a.transpose();
  const Eigen::SparseMatrix<double> normal = at * a;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.compute(normal);
  if (solver.info() != Eigen::Success) fail(ErrorKind::Numeric, "rank-deficient system after elimination");
  const Eigen::VectorXd d = solver.vectorD();
  if (d.minCoeff() <= 1e-14 * d.cwiseAbs().maxCoeff()) {
    fail(ErrorKind::Numeric, "rank-deficient system after elimination");
  }

  Eigen::MatrixXd x = solver.solve(at * b);
  const double b_norm = b.norm();
  auto relative_residual = [&](const Eigen::MatrixXd& residual) {
    const double scale = b_norm > 0.0 ? b_norm : 1.0;
    return residual.norm() / scale;
  };
  Eigen::MatrixXd residual = b - a * x;
  double rel = relative_residual(residual);
  int refinements = 0;
  // Iterative refinement against the original row system recovers the accuracy
  // lost by squaring the condition number.
  while (refinements < options.max_refinements && rel > 1e-3 * options.tolerance) {
    x += solver.solve(at * residual);
    residual = b - a * x;
    const double next = relative_residual(residual);
    ++refinements;
    if (!(next < rel)) {
      rel = next;
      break;
    }
    rel = next;
  }
  if (!std::isfinite(rel) || rel > options.tolerance) {
    fail(ErrorKind::Numeric, "reconstruction residual " + std::to_string(rel) + " exceeds tolerance");
  }
  if (report) *report = {rel, refinements};

  for (int r = 0; r < unknowns; ++r) out[free_rows[r]->vertex] = x.row(r).transpose();
  return out;
}

}  // namespace bwm::mesh
