#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace sdsrl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Error categories raised by the library. Every message is a single line
// suitable for direct printing on stderr.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class DataError : public Error { public: using Error::Error; };
class NumericError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class DivergenceError : public Error { public: using Error::Error; };

// Derives an independent stream seed from a master seed (SplitMix64 mix).
// Stage k of a job always draws derive_seed(master, k), so one knob
// reproduces every random choice in the pipeline.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// FNV-1a 64-bit hash; used as the model-file checksum.
std::uint64_t fnv1a64(const void* data, std::size_t size);

// Worker threads for row-parallel kernels: SDSRL_THREADS env var,
// 0 or unset means hardware concurrency.
int worker_threads();

// Runs fn(begin, end) over disjoint chunks of [0, n). Each chunk must only
// write rows it owns, so results are identical under any schedule.
void parallel_rows(Index n, const std::function<void(Index, Index)>& fn);

// 17-significant-digit decimal form; round-trips any finite double exactly.
std::string format_double(double value);

}  // namespace sdsrl
