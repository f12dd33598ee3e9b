#include "spfit/linalg.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "spfit/errors.hpp"

namespace spfit {

double Cholesky::log_det() const {
  return 2.0 * lower.diagonal().array().log().sum();
}

Eigen::VectorXd Cholesky::solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd y = lower.triangularView<Eigen::Lower>().solve(b);
  return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd Cholesky::solve(const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd y = lower.triangularView<Eigen::Lower>().solve(b);
  return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd Cholesky::forward(const Eigen::MatrixXd& b) const {
  return lower.triangularView<Eigen::Lower>().solve(b);
}

Cholesky factorize_spd(const Eigen::MatrixXd& m, double scale, double jitter0,
                       double jitter_max) {
  if (m.rows() != m.cols()) {
    throw InvalidArgumentError("factorize_spd: matrix is not square");
  }
  if (m.rows() == 0) {
    return Cholesky{Eigen::MatrixXd(0, 0), 0.0};
  }
  const double s = (scale > 0.0 && std::isfinite(scale)) ? scale : 1.0;
  double jitter = jitter0;
  while (true) {
    Eigen::MatrixXd work = m;
    work.diagonal().array() += jitter * s;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
      return Cholesky{llt.matrixL(), jitter * s};
    }
    if (jitter >= jitter_max || jitter <= 0.0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(work, Eigen::EigenvaluesOnly);
      std::ostringstream msg;
      msg << "Cholesky factorization failed at dimension " << m.rows() << " with jitter "
          << jitter * s << "; smallest pivot (eigenvalue) "
          << (es.info() == Eigen::Success ? es.eigenvalues().minCoeff()
                                          : std::nan(""));
      throw IllConditionedError(msg.str());
    }
    jitter = std::min(jitter * 100.0, jitter_max);
  }
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  std::size_t workers = threads <= 0 ? hw : static_cast<std::size_t>(threads);
  workers = std::min<std::size_t>(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&]() {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace spfit
