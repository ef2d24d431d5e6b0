#include "mvd/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvd/rng.hpp"

namespace mvd::corpus {
namespace {

const std::vector<std::string> kPtrNames = {"p", "q", "buf", "data", "blk", "mem", "chunk"};
const std::vector<std::string> kIntNames = {"n", "m", "len", "count", "num"};
const std::vector<std::string> kFillerNames = {"t0", "t1", "t2", "acc", "tmp", "aux"};
const std::vector<std::string> kVerbs = {"handle", "process", "update", "copy",
                                         "load", "refresh", "pack"};
const std::vector<std::string> kNouns = {"block", "buffer", "entry", "packet",
                                         "record", "frame"};
const std::vector<std::string> kHelpers = {"release_buf", "drop_ref", "discard_item",
                                           "cleanup_slot"};
const std::vector<std::string> kChecks = {"validate", "probe", "inspect", "check_state"};
const std::vector<int> kAllocSizes = {8, 16, 32, 64};
const std::vector<int> kSmallLits = {1, 2, 3, 5, 7};
const std::vector<char> kChars = {'a', 'x', 'w', 'k', 'z', 'i'};

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& pool) {
  return pool[static_cast<size_t>(rng.index(static_cast<int>(pool.size())))];
}

std::string pick_distinct(Rng& rng, const std::vector<std::string>& pool,
                          const std::vector<std::string>& taken) {
  for (int i = 0; i < 64; ++i) {
    const std::string& c = pick(rng, pool);
    bool clash = false;
    for (const auto& t : taken) clash |= (t == c);
    if (!clash) return c;
  }
  return pool.front() + "_alt";
}

struct Builder {
  std::ostringstream os;
  int line = 0;
  std::vector<int> marked;

  int add(const std::string& code, bool mark = false) {
    os << code;
    if (mark) os << " // @vuln";
    os << '\n';
    ++line;
    if (mark) marked.push_back(line);
    return line;
  }
};

// Statements on integers that stay disjoint from the pattern variables.
struct Fillers {
  std::vector<std::string> decls;   // emitted early
  std::vector<std::string> stmts;   // emitted later
};

Fillers make_fillers(Rng& rng, const std::string& int_param) {
  Fillers f;
  int count = rng.index(3);  // 0..2
  std::vector<std::string> vars;
  for (int i = 0; i < count; ++i) {
    std::string v = pick_distinct(rng, kFillerNames, vars);
    vars.push_back(v);
    const char* op = rng.index(2) ? "+" : "*";
    f.decls.push_back("    int " + v + " = " + int_param + " " + op + " " +
                      std::to_string(pick(rng, kSmallLits)) + ";");
    if (rng.index(2)) {
      f.stmts.push_back("    " + v + " = " + v + " - " +
                        std::to_string(pick(rng, kSmallLits)) + ";");
    }
  }
  return f;
}

void emit_lines(Builder& b, const std::vector<std::string>& lines) {
  for (const auto& l : lines) b.add(l);
}

struct CasePair {
  std::string vuln_source, patch_source;
  std::vector<int> vuln_marked;
};

std::string fn_name(Rng& rng, int index) {
  return pick(rng, kVerbs) + "_" + pick(rng, kNouns) + "_" + std::to_string(index);
}

// Memory leak. Variant 0: the allocation is never released (the twin frees
// at the end). Variant 1: an error path returns before the release (the
// twin frees on that path too).
CasePair gen_ml(Rng& rng, int variant, int index) {
  std::string fn = fn_name(rng, index);
  std::string p = pick(rng, kPtrNames);
  std::string n = pick(rng, kIntNames);
  std::string ch(1, pick(rng, kChars));
  int sz = pick(rng, kAllocSizes);
  Fillers fill = make_fillers(rng, n);
  std::string check = pick(rng, kChecks);
  std::string r = pick_distinct(rng, kIntNames, {n});
  int k = pick(rng, kSmallLits);

  CasePair out;
  for (bool vuln : {true, false}) {
    Builder b;
    b.add("void " + fn + "(int " + n + ")");
    b.add("{");
    b.add("    char *" + p + " = malloc(" + std::to_string(sz) + ");", vuln);
    emit_lines(b, fill.decls);
    if (variant == 1) {
      b.add("    int " + r + " = " + check + "(" + p + ");");
      if (vuln) {
        b.add("    if (" + r + " > " + std::to_string(k) + ") { return; }");
      } else {
        b.add("    if (" + r + " > " + std::to_string(k) + ") { free(" + p + "); return; }");
      }
    }
    b.add("    *" + p + " = '" + ch + "';");
    emit_lines(b, fill.stmts);
    if (variant == 1 || !vuln) b.add("    free(" + p + ");");
    b.add("}");
    if (vuln) {
      out.vuln_source = b.os.str();
      out.vuln_marked = b.marked;
    } else {
      out.patch_source = b.os.str();
    }
  }
  return out;
}

// Double free: a conditional release followed by an unconditional one; the
// patch returns out of the conditional branch. The pointer is only read by
// calls, so both releases stay fed by the allocation itself.
CasePair gen_df(Rng& rng, int /*variant*/, int index) {
  std::string fn = fn_name(rng, index);
  std::string p = pick(rng, kPtrNames);
  std::string n = pick(rng, kIntNames);
  int sz = pick(rng, kAllocSizes);
  int k = pick(rng, kSmallLits);
  bool probe_use = rng.index(2) == 1;
  std::string check = pick(rng, kChecks);
  Fillers fill = make_fillers(rng, n);

  CasePair out;
  for (bool vuln : {true, false}) {
    Builder b;
    b.add("void " + fn + "(int " + n + ")");
    b.add("{");
    b.add("    char *" + p + " = malloc(" + std::to_string(sz) + ");");
    if (probe_use) b.add("    " + check + "(" + p + ");");
    emit_lines(b, fill.decls);
    if (vuln) {
      b.add("    if (" + n + " > " + std::to_string(k) + ") { free(" + p + "); }");
    } else {
      b.add("    if (" + n + " > " + std::to_string(k) + ") { free(" + p + "); return; }");
    }
    emit_lines(b, fill.stmts);
    b.add("    free(" + p + ");", vuln);
    b.add("}");
    if (vuln) {
      out.vuln_source = b.os.str();
      out.vuln_marked = b.marked;
    } else {
      out.patch_source = b.os.str();
    }
  }
  return out;
}

// Use-after-free. Variant 0: write through the pointer after the release.
// Variant 1: pointer arithmetic after the release. Variant 2: the release
// happens inside a helper (the marked statement is the premature call).
// Patches move the release after the last use.
CasePair gen_uaf(Rng& rng, int variant, int index) {
  std::string fn = fn_name(rng, index);
  std::string b_name = pick(rng, kPtrNames);
  std::string n = pick(rng, kIntNames);
  std::string ch1(1, pick(rng, kChars));
  std::string ch2(1, pick(rng, kChars));
  int sz = pick(rng, kAllocSizes);
  int off = pick(rng, kSmallLits);
  // Variants 0/1: the release reads the allocation directly (no write in
  // between), so premature and orderly releases have distinct def-use shapes.
  bool init_write = variant == 2;
  std::string helper = pick(rng, kHelpers);
  std::string q = pick_distinct(rng, kPtrNames, {b_name});
  Fillers fill = make_fillers(rng, n);

  CasePair out;
  for (bool vuln : {true, false}) {
    Builder b;
    if (variant == 2) {
      b.add("void " + helper + "(char *" + q + ")");
      b.add("{");
      b.add("    free(" + q + ");");
      b.add("}");
    }
    b.add("void " + fn + "(int " + n + ")");
    b.add("{");
    b.add("    char *" + b_name + " = malloc(" + std::to_string(sz) + ");");
    if (init_write) b.add("    *" + b_name + " = '" + ch1 + "';");
    emit_lines(b, fill.decls);
    emit_lines(b, fill.stmts);

    std::string release = variant == 2 ? "    " + helper + "(" + b_name + ");"
                                       : "    free(" + b_name + ");";
    std::string use;
    switch (variant) {
      case 0:
      case 2: use = "    *" + b_name + " = '" + ch2 + "';"; break;
      default:
        use = "    " + b_name + " = " + b_name + " + " + std::to_string(off) + ";";
        break;
    }
    if (vuln) {
      b.add(release, true);
      b.add(use);
    } else {
      b.add(use);
      b.add(release);
    }
    b.add("}");
    if (vuln) {
      out.vuln_source = b.os.str();
      out.vuln_marked = b.marked;
    } else {
      out.patch_source = b.os.str();
    }
  }
  return out;
}

// Buffer overflow: strcpy of a 32-character literal into a small stack
// buffer. Patch enlarges the buffer (variant 0) or bounds the copy
// (variant 1).
CasePair gen_bo(Rng& rng, int variant, int index) {
  std::string fn = fn_name(rng, index);
  std::string d = pick(rng, kPtrNames);
  std::string s = pick_distinct(rng, kPtrNames, {d});
  std::string n = pick(rng, kIntNames);
  const std::vector<int> bad_sizes = {4, 8, 16};
  const std::vector<int> good_sizes = {48, 64};
  int bad = pick(rng, bad_sizes);
  int good = pick(rng, good_sizes);
  std::string literal(32, 'A');
  Fillers fill = make_fillers(rng, n);

  CasePair out;
  for (bool vuln : {true, false}) {
    int dsz = vuln ? bad : (variant == 0 ? good : bad);
    Builder b;
    b.add("void " + fn + "(int " + n + ")");
    b.add("{");
    b.add("    char " + d + "[" + std::to_string(dsz) + "];");
    b.add("    char *" + s + " = \"" + literal + "\";");
    emit_lines(b, fill.decls);
    emit_lines(b, fill.stmts);
    if (vuln || variant == 0) {
      b.add("    strcpy(" + d + ", " + s + ");", vuln);
    } else {
      b.add("    strncpy(" + d + ", " + s + ", " + std::to_string(dsz) + ");");
    }
    b.add("}");
    if (vuln) {
      out.vuln_source = b.os.str();
      out.vuln_marked = b.marked;
    } else {
      out.patch_source = b.os.str();
    }
  }
  return out;
}

// Out-of-bounds index. Variant 0: a constant index past the array end.
// Variant 1: an off-by-one loop bound.
CasePair gen_oob(Rng& rng, int variant, int index) {
  std::string fn = fn_name(rng, index);
  std::string a = pick(rng, kPtrNames);
  std::string i = pick_distinct(rng, kIntNames, {});
  std::string n = pick_distinct(rng, kIntNames, {i});
  const std::vector<int> bad_idx = {9, 12, 16};
  const std::vector<int> good_idx = {1, 3, 6};
  int bad = pick(rng, bad_idx);
  int good = pick(rng, good_idx);
  int lit = pick(rng, kSmallLits);
  Fillers fill = make_fillers(rng, n);

  CasePair out;
  for (bool vuln : {true, false}) {
    Builder b;
    b.add("void " + fn + "(int " + n + ")");
    b.add("{");
    b.add("    int " + a + "[8];");
    if (variant == 0) {
      b.add("    int " + i + " = " + std::to_string(vuln ? bad : good) + ";");
      emit_lines(b, fill.decls);
      emit_lines(b, fill.stmts);
      b.add("    " + a + "[" + i + "] = " + n + " + " + std::to_string(lit) + ";", vuln);
    } else {
      b.add("    int " + i + " = 0;");
      emit_lines(b, fill.decls);
      b.add(std::string("    while (") + i + (vuln ? " <= " : " < ") + "8)");
      b.add("    {");
      b.add("        " + a + "[" + i + "] = " + i + " * 2;", vuln);
      b.add("        " + i + " = " + i + " + 1;");
      b.add("    }");
    }
    b.add("}");
    if (vuln) {
      out.vuln_source = b.os.str();
      out.vuln_marked = b.marked;
    } else {
      out.patch_source = b.os.str();
    }
  }
  return out;
}

struct Family {
  std::string name;
  int variants;
  CasePair (*gen)(Rng&, int, int);
};

const std::vector<Family>& families() {
  static const std::vector<Family> f = {
      {"ml", 2, gen_ml}, {"df", 1, gen_df}, {"uaf", 3, gen_uaf},
      {"bo", 2, gen_bo}, {"oob", 2, gen_oob},
  };
  return f;
}

}  // namespace

const std::vector<std::string>& family_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& f : families()) n.push_back(f.name);
    return n;
  }();
  return names;
}

std::vector<CorpusFile> gen_corpus(const std::string& out_dir, int n_per_pattern,
                                   std::uint64_t seed) {
  if (n_per_pattern < 1) throw std::runtime_error("gen_corpus: n_per_pattern must be >= 1");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::vector<CorpusFile> manifest;
  for (size_t fi = 0; fi < families().size(); ++fi) {
    const Family& fam = families()[fi];
    for (int c = 0; c < n_per_pattern; ++c) {
      // Per-case RNG so a case does not depend on how many came before it.
      Rng rng(hash_combine(hash_combine(seed, fi), static_cast<std::uint64_t>(c)));
      int variant = c % fam.variants;
      CasePair pair = fam.gen(rng, variant, c);

      char idx[16];
      std::snprintf(idx, sizeof(idx), "%03d", c);
      std::string vname = fam.name + "_" + idx + "_vuln.c";
      std::string pname = fam.name + "_" + idx + "_patch.c";
      {
        std::ofstream out(fs::path(out_dir) / vname);
        out << pair.vuln_source;
      }
      {
        std::ofstream out(fs::path(out_dir) / pname);
        out << pair.patch_source;
      }
      manifest.push_back({vname, fam.name, variant, true, pair.vuln_marked});
      manifest.push_back({pname, fam.name, variant, false, {}});
    }
  }

  std::ofstream mf(fs::path(out_dir) / "manifest.csv");
  mf << "path,family,variant,kind,marked_lines\n";
  for (const auto& row : manifest) {
    mf << row.path << ',' << row.family << ',' << row.variant << ','
       << (row.vulnerable ? "vuln" : "patch") << ',';
    for (size_t i = 0; i < row.marked_lines.size(); ++i) {
      if (i) mf << ';';
      mf << row.marked_lines[i];
    }
    mf << '\n';
  }
  return manifest;
}

}  // namespace mvd::corpus
