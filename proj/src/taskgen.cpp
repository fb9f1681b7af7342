// SPDX-License-Identifier: Apache-2.0

#include "mpt/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mpt/binio.hpp"

namespace mpt {

std::string family_name(TaskFamily f) {
  switch (f) {
    case TaskFamily::kCopy: return "copy";
    case TaskFamily::kReverse: return "reverse";
    case TaskFamily::kSort: return "sort";
    case TaskFamily::kMapSubstitute: return "map-substitute";
    case TaskFamily::kClassifyParity: return "classify-parity";
    case TaskFamily::kClassifyMajority: return "classify-majority";
  }
  return "?";
}

TaskFamily parse_family(const std::string& name) {
  for (TaskFamily f : {TaskFamily::kCopy, TaskFamily::kReverse, TaskFamily::kSort,
                       TaskFamily::kMapSubstitute, TaskFamily::kClassifyParity,
                       TaskFamily::kClassifyMajority})
    if (family_name(f) == name) return f;
  throw std::invalid_argument("unknown task family '" + name + "'");
}

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

const std::vector<Example>& TaskCorpus::split(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kDev: return dev;
    case Split::kTest: return test;
  }
  return train;
}

std::size_t content_token_count(std::size_t vocab_size) {
  return vocab_size > static_cast<std::size_t>(kFirstContentToken)
             ? vocab_size - static_cast<std::size_t>(kFirstContentToken)
             : 0;
}

std::vector<int> substitution_table(std::size_t vocab_size, std::uint64_t seed) {
  const std::size_t n = content_token_count(vocab_size);
  std::vector<int> table(n);
  std::iota(table.begin(), table.end(), kFirstContentToken);
  Rng rng = Rng(seed).fork("substitution");
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(table[i - 1], table[j]);
  }
  return table;
}

std::vector<int> expected_target(TaskFamily family, std::span<const int> src,
                                 std::size_t vocab_size, std::uint64_t seed) {
  std::vector<int> out(src.begin(), src.end());
  switch (family) {
    case TaskFamily::kCopy:
      break;
    case TaskFamily::kReverse:
      std::reverse(out.begin(), out.end());
      break;
    case TaskFamily::kSort:
      std::sort(out.begin(), out.end());
      break;
    case TaskFamily::kMapSubstitute: {
      const std::vector<int> table = substitution_table(vocab_size, seed);
      for (int& t : out) t = table[static_cast<std::size_t>(t - kFirstContentToken)];
      break;
    }
    case TaskFamily::kClassifyParity: {
      int sum = 0;
      for (int t : src) sum += t - kFirstContentToken;
      out = {kFirstContentToken + (sum % 2)};
      break;
    }
    case TaskFamily::kClassifyMajority: {
      // Label: does the lower half of the content alphabet hold at least half
      // of the tokens?
      const auto half = static_cast<int>(content_token_count(vocab_size) / 2);
      std::size_t low = 0;
      for (int t : src)
        if (t - kFirstContentToken < half) ++low;
      out = {kFirstContentToken + (2 * low >= src.size() ? 0 : 1)};
      break;
    }
  }
  return out;
}

TaskCorpus generate_task(const std::string& task_id, TaskFamily family, std::size_t vocab_size,
                         const SplitSizes& sizes, const LengthRange& lengths, Rng rng) {
  if (vocab_size < 4) throw std::invalid_argument("generate_task: vocab_size must be >= 4");
  const std::size_t symbols = content_token_count(vocab_size);
  if (symbols == 0) throw std::invalid_argument("generate_task: no content tokens in vocabulary");
  if (family == TaskFamily::kClassifyParity || family == TaskFamily::kClassifyMajority) {
    if (symbols < 2) throw std::invalid_argument("generate_task: classification needs 2 labels");
  }
  if (sizes.train < 1 || sizes.dev < 1 || sizes.test < 1)
    throw std::invalid_argument("generate_task: every split needs at least one example");
  if (lengths.min < 1 || lengths.max < lengths.min)
    throw std::invalid_argument("generate_task: invalid length range");

  const std::size_t wanted = sizes.train + sizes.dev + sizes.test;
  double space = 0.0;
  for (std::size_t len = lengths.min; len <= lengths.max; ++len)
    space += std::pow(static_cast<double>(symbols), static_cast<double>(len));
  if (space < 2.0 * static_cast<double>(wanted))
    throw std::invalid_argument("generate_task: length range too small for distinct examples");

  TaskCorpus c;
  c.task_id = task_id;
  c.family = family;
  c.vocab_size = vocab_size;
  c.seed = rng.seed();
  c.lengths = lengths;

  std::set<std::vector<int>> seen;
  std::vector<Example> all;
  all.reserve(wanted);
  while (all.size() < wanted) {
    const auto len = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(lengths.min), static_cast<std::int64_t>(lengths.max)));
    std::vector<int> src(len);
    for (int& t : src) t = kFirstContentToken + static_cast<int>(rng.uniform_index(symbols));
    if (!seen.insert(src).second) continue;
    Example ex{src, expected_target(family, src, vocab_size, c.seed)};
    all.push_back(std::move(ex));
  }
  c.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(sizes.train));
  c.dev.assign(all.begin() + static_cast<std::ptrdiff_t>(sizes.train),
               all.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.dev));
  c.test.assign(all.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.dev), all.end());
  return c;
}

FewShotSample few_shot(const TaskCorpus& corpus, std::size_t k, Rng rng) {
  const std::size_t n = corpus.train.size();
  if (k > n)
    throw std::invalid_argument("few_shot: k=" + std::to_string(k) + " exceeds train size " +
                                std::to_string(n));
  FewShotSample s;
  s.parent_task = corpus.task_id;
  s.k = k;
  s.seed = rng.seed();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
    std::swap(idx[i], idx[j]);
  }
  s.indices.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  for (std::size_t i : s.indices) s.examples.push_back(corpus.train[i]);
  return s;
}

double evaluate(const FrozenModel& model, const Matrix& prompt, std::span<const Example> examples) {
  if (examples.empty()) throw std::invalid_argument("evaluate: empty split");
  if (prompt.rows() > 0 && prompt.cols() != model.config().d_model)
    throw ShapeError("evaluate: prompt width does not match model");
  std::vector<char> correct(examples.size(), 0);
  const auto n = static_cast<long long>(examples.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (long long i = 0; i < n; ++i) {
    try {
      const Example& ex = examples[static_cast<std::size_t>(i)];
      correct[static_cast<std::size_t>(i)] =
          model.greedy_decode(prompt, ex.src, ex.tgt.size()) == ex.tgt ? 1 : 0;
    } catch (...) {
#pragma omp critical(mpt_evaluate_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  const auto hits = std::count(correct.begin(), correct.end(), 1);
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

double evaluate(const FrozenModel& model, const Matrix& prompt, const TaskCorpus& corpus,
                Split split) {
  return evaluate(model, prompt, corpus.split(split));
}

SuiteSpec default_suite() {
  SuiteSpec s;
  s.sources = {{"copy", TaskFamily::kCopy},
               {"reverse", TaskFamily::kReverse},
               {"map_a", TaskFamily::kMapSubstitute},
               {"parity", TaskFamily::kClassifyParity}};
  s.targets = {{"sort", TaskFamily::kSort}, {"map_b", TaskFamily::kMapSubstitute}};
  return s;
}

Suite generate_suite(const SuiteSpec& spec, std::uint64_t seed) {
  const Rng root(seed);
  Suite suite;
  for (const auto& t : spec.sources)
    suite.sources.push_back(generate_task(t.task_id, t.family, spec.vocab_size, spec.sizes,
                                          spec.lengths, root.fork("task:" + t.task_id)));
  for (const auto& t : spec.targets)
    suite.targets.push_back(generate_task(t.task_id, t.family, spec.vocab_size, spec.sizes,
                                          spec.lengths, root.fork("task:" + t.task_id)));
  return suite;
}

// ---- files ------------------------------------------------------------------------

namespace {

void append_tokens(std::ostringstream& os, const std::vector<int>& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) os << ' ';
    os << ids[i];
  }
}

std::vector<int> parse_tokens(const std::string& field, std::size_t vocab, std::size_t line_no) {
  std::vector<int> ids;
  std::istringstream is(field);
  std::string tok;
  while (is >> tok) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || v < 0)
      throw CorpusFormatError("line " + std::to_string(line_no) + ": bad token '" + tok + "'");
    if (static_cast<std::size_t>(v) >= vocab)
      throw CorpusFormatError("line " + std::to_string(line_no) + ": token id " + tok +
                              " >= vocab " + std::to_string(vocab));
    ids.push_back(static_cast<int>(v));
  }
  if (ids.empty()) throw CorpusFormatError("line " + std::to_string(line_no) + ": empty sequence");
  return ids;
}

std::filesystem::path split_path(const std::filesystem::path& dir, const std::string& id, Split s) {
  return dir / (id + "." + split_name(s) + ".tsv");
}

}  // namespace

std::string format_split(const TaskCorpus& corpus, Split split) {
  std::ostringstream os;
  os << "#task " << corpus.task_id << " family=" << family_name(corpus.family)
     << " vocab=" << corpus.vocab_size << " seed=" << corpus.seed << '\n';
  for (const Example& ex : corpus.split(split)) {
    append_tokens(os, ex.src);
    os << '\t';
    append_tokens(os, ex.tgt);
    os << '\n';
  }
  return os.str();
}

ParsedSplit parse_split(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("#task ", 0) != 0)
    throw CorpusFormatError("line 1: missing '#task' header");
  ParsedSplit p{};
  {
    std::istringstream hs(line.substr(6));
    std::string field;
    bool have_family = false, have_vocab = false, have_seed = false;
    if (!(hs >> p.task_id)) throw CorpusFormatError("line 1: missing task id");
    while (hs >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) throw CorpusFormatError("line 1: bad header field '" + field + "'");
      const std::string key = field.substr(0, eq);
      const std::string value = field.substr(eq + 1);
      try {
        if (key == "family") {
          p.family = parse_family(value);
          have_family = true;
        } else if (key == "vocab") {
          p.vocab_size = std::stoul(value);
          have_vocab = true;
        } else if (key == "seed") {
          p.seed = std::stoull(value);
          have_seed = true;
        } else {
          throw CorpusFormatError("line 1: unknown header key '" + key + "'");
        }
      } catch (const std::logic_error& e) {
        throw CorpusFormatError(std::string("line 1: ") + e.what());
      }
    }
    if (!have_family || !have_vocab || !have_seed)
      throw CorpusFormatError("line 1: header needs family, vocab and seed");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw CorpusFormatError("line " + std::to_string(line_no) + ": expected src<TAB>tgt");
    Example ex{parse_tokens(line.substr(0, tab), p.vocab_size, line_no),
               parse_tokens(line.substr(tab + 1), p.vocab_size, line_no)};
    if (expected_target(p.family, ex.src, p.vocab_size, p.seed) != ex.tgt)
      throw CorpusFormatError("line " + std::to_string(line_no) + ": target violates " +
                              family_name(p.family) + " relation");
    p.examples.push_back(std::move(ex));
  }
  return p;
}

void write_corpus(const std::filesystem::path& dir, const TaskCorpus& corpus) {
  for (Split s : {Split::kTrain, Split::kDev, Split::kTest})
    write_file_bytes(split_path(dir, corpus.task_id, s), format_split(corpus, s));
}

TaskCorpus read_corpus(const std::filesystem::path& dir, const std::string& task_id) {
  TaskCorpus c;
  bool first = true;
  for (Split s : {Split::kTrain, Split::kDev, Split::kTest}) {
    ParsedSplit p = parse_split(read_file_bytes(split_path(dir, task_id, s)));
    if (p.task_id != task_id)
      throw CorpusFormatError("corpus file for '" + task_id + "' declares task '" + p.task_id + "'");
    if (first) {
      c.task_id = p.task_id;
      c.family = p.family;
      c.vocab_size = p.vocab_size;
      c.seed = p.seed;
      first = false;
    } else if (p.family != c.family || p.vocab_size != c.vocab_size || p.seed != c.seed) {
      throw CorpusFormatError("split headers disagree for task '" + task_id + "'");
    }
    std::vector<Example>& dst = s == Split::kTrain ? c.train : s == Split::kDev ? c.dev : c.test;
    dst = std::move(p.examples);
    if (dst.empty()) throw CorpusFormatError("task '" + task_id + "' has an empty " + split_name(s) + " split");
  }
  std::size_t lo = ~std::size_t{0}, hi = 0;
  for (const auto* split : {&c.train, &c.dev, &c.test})
    for (const Example& ex : *split) {
      lo = std::min(lo, ex.src.size());
      hi = std::max(hi, ex.src.size());
    }
  c.lengths = {lo, hi};
  return c;
}

}  // namespace mpt
