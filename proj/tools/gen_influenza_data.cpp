// Regenerates the synthetic viral-load dataset shipped under data/. The file
// is a format-compatible stand-in for the original experiment (which is not
// redistributable); swap in the real measurements by replacing the CSV.
#include <cstdint>
#include <cstdlib>
#include <iostream>

#include "spfit/csv.hpp"
#include "spfit/pipeline.hpp"

int main(int argc, char** argv) {
  std::uint64_t seed = 1;
  std::string out = "data/influenza_synthetic.csv";
  if (argc > 1) seed = std::strtoull(argv[1], nullptr, 10);
  if (argc > 2) out = argv[2];
  const auto rows = spfit::make_influenza_standin(seed);
  spfit::write_data_csv(out, rows);
  std::cout << out << " (" << rows.size() << " rows)\n";
  return 0;
}
