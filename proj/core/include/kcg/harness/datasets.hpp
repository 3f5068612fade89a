#pragma once

#include <cstdint>
#include <string>

#include "kcg/dataset.hpp"
#include "kcg/kernels.hpp"

namespace kcg::harness {

struct ToyOptions {
  Index train = 100;
  Index test = 100;
  double noise = 0.1;  ///< observation noise variance added to the GP draw
};

/// One-dimensional toy problem: half the inputs from an equal-weight mixture of
/// N(0, 1), N(1, 0.1), N(-0.5, 0.05) (variances), half uniform on [0, 1];
/// targets are a joint draw from the SE GP with metric 0.25 and amplitude 2
/// plus Gaussian noise. Training and test inputs are drawn the same way.
Dataset gen_toy(std::uint64_t seed, const ToyOptions& options = {});
/// The kernel the toy targets are drawn from.
Kernel toy_kernel();

/// Comma-separated numeric table with a header row. All columns other than
/// `target_column` are inputs. Rows are shuffled by `seed` and the leading
/// (1 - test_fraction) share becomes the training set.
/// Throws std::runtime_error naming the row and column of any bad cell, and
/// InvalidArgument naming the available headers when the target is missing.
Dataset load_csv(const std::string& path, const std::string& target_column, double test_fraction, std::uint64_t seed);

/// Series file with columns time,value,mask on an equispaced time grid.
/// Rows with mask 1 are training data, rows with mask 0 are held out. The
/// result carries the masked Toeplitz structure of `kernel` over the series.
Dataset load_sound_csv(const std::string& path, const Kernel& kernel);

/// Writes the harness dataset format: header split,x0..x{D-1},y with split
/// "train" or "test"; values printed round-trip exactly.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

/// Population variance (divides by n).
double population_variance(const Vector& v);

}  // namespace kcg::harness
