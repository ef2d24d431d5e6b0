#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mvd::corpus {

struct CorpusFile {
  std::string path;  // relative to the output directory
  std::string family;
  int variant = 0;
  bool vulnerable = false;
  std::vector<int> marked_lines;
};

/// Emits a labeled training corpus: for each of the five memory-vulnerability
/// families (memory leak, double free, use-after-free, buffer overflow,
/// out-of-bounds index), n_per_pattern vulnerable files with `// @vuln`
/// markers plus one patched twin each. Identifier names, sizes, fillers and
/// branch shapes vary under the seed. Also writes manifest.csv.
std::vector<CorpusFile> gen_corpus(const std::string& out_dir, int n_per_pattern,
                                   std::uint64_t seed);

const std::vector<std::string>& family_names();

}  // namespace mvd::corpus
