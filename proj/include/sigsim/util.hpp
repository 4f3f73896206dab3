#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace sigsim {

// Golden-section search for the maximum of a unimodal function on [lo, hi].
// Returns the abscissa of the maximum.
template <class F>
double golden_section_max(F&& f, double lo, double hi, double tol, int max_iter = 200) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < max_iter && (b - a) > tol; ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

template <class F>
double golden_section_min(F&& f, double lo, double hi, double tol, int max_iter = 200) {
  return golden_section_max([&](double x) { return -f(x); }, lo, hi, tol, max_iter);
}

// Chunked parallel loop over [0, n). Work is partitioned by index, so results
// keyed by index are identical for every job count.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// FNV-1a, used for config/content hashes.
uint64_t fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ULL);
std::string hash_hex(uint64_t h);
uint64_t hash_file(const std::string& path);

// Round-trip-exact decimal formatting (17 significant digits).
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace sigsim
