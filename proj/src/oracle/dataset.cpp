#include "sgt/oracle/dataset.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "sgt/errors.hpp"
#include "sgt/rng.hpp"

namespace sgt::oracle {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

void write_sequence(std::ostream& out, const SubgoalSequence& seq) {
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) out << (i ? " " : "") << seq.tokens[i].name();
}

SubgoalSequence parse_sequence(const std::string& field, const std::string& label,
                               const std::string& source, int line_no) {
  const std::string prefix = label + ":";
  if (field.rfind(prefix, 0) != 0)
    throw ParseError(source, line_no, "expected field starting with '" + prefix + "'");
  SubgoalSequence seq;
  std::istringstream in(field.substr(prefix.size()));
  std::string tok;
  while (in >> tok) {
    const auto sq = chess::parse_square(tok);
    if (!sq) throw ParseError(source, line_no, "bad square '" + tok + "'");
    seq.tokens.push_back(*sq);
  }
  return seq;
}

}  // namespace

std::vector<DatasetEntry> Dataset::select(const std::vector<int>& ids) const {
  std::vector<DatasetEntry> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(entry(id));
  return out;
}

Dataset build_dataset(Square start, std::uint64_t seed) {
  Dataset ds;
  ds.start = start;
  ds.seed = seed;
  const auto tasks = chess::enumerate_tasks(start);
  ds.entries.reserve(tasks.size());
  for (const Task& task : tasks) {
    DatasetEntry e;
    e.task = task;
    e.expert = extract_subgoals(solve_optimal(PieceKind::Bishop, task));
    e.learner = extract_subgoals(solve_optimal(PieceKind::Knight, task));
    ds.entries.push_back(std::move(e));
  }

  std::vector<int> ids(ds.entries.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  Rng rng(derive_seed(seed, "dataset-split"));
  rng.shuffle(std::span<int>(ids));
  const auto n_test = std::min<std::size_t>(kTestTasks, ids.size());
  ds.test_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  ds.train_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
  std::sort(ds.test_ids.begin(), ds.test_ids.end());
  std::sort(ds.train_ids.begin(), ds.train_ids.end());
  for (int id : ds.test_ids) ds.entries[static_cast<std::size_t>(id)].split = Split::Test;
  return ds;
}

std::vector<Fold> kfold_split(const Dataset& dataset, int k) {
  const int n = static_cast<int>(dataset.entries.size());
  if (k < 2) throw std::invalid_argument("kfold: K must be at least 2");
  if (k > n) throw std::invalid_argument("kfold: K exceeds the number of tasks");
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
  Rng rng(derive_seed(dataset.seed, "kfold"));
  rng.shuffle(std::span<int>(ids));

  std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    const int size = n / k + (f < n % k ? 1 : 0);
    auto& fold = folds[static_cast<std::size_t>(f)];
    fold.assign(ids.begin() + static_cast<std::ptrdiff_t>(pos),
                ids.begin() + static_cast<std::ptrdiff_t>(pos + static_cast<std::size_t>(size)));
    std::sort(fold.begin(), fold.end());
    pos += static_cast<std::size_t>(size);
  }
  std::vector<Fold> out(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    auto& fold = out[static_cast<std::size_t>(f)];
    fold.validation_ids = folds[static_cast<std::size_t>(f)];
    for (int g = 0; g < k; ++g)
      if (g != f)
        fold.train_ids.insert(fold.train_ids.end(), folds[static_cast<std::size_t>(g)].begin(),
                              folds[static_cast<std::size_t>(g)].end());
    std::sort(fold.train_ids.begin(), fold.train_ids.end());
  }
  return out;
}

DatasetStats summarize(const Dataset& dataset) {
  DatasetStats s;
  s.tasks = dataset.entries.size();
  s.train = dataset.train_ids.size();
  s.test = dataset.test_ids.size();
  if (s.tasks == 0) return s;
  double expert = 0.0, learner = 0.0;
  for (const auto& e : dataset.entries) {
    expert += static_cast<double>(e.expert.size());
    learner += static_cast<double>(e.learner.size());
  }
  s.expert_mean_length = expert / static_cast<double>(s.tasks);
  s.learner_mean_length = learner / static_cast<double>(s.tasks);
  return s;
}

void write_dataset(std::ostream& out, const Dataset& ds, const std::vector<std::string>& header_comments) {
  out << "sgt-dataset " << kDatasetVersion << '\n';
  out << "start " << ds.start.name() << '\n';
  out << "seed " << ds.seed << '\n';
  for (const auto& c : header_comments) out << "# " << c << '\n';
  for (const auto& e : ds.entries) {
    out << e.task.id << " | " << (e.split == Split::Train ? "train" : "test") << " | expert: ";
    write_sequence(out, e.expert);
    out << " | learner: ";
    write_sequence(out, e.learner);
    out << '\n';
  }
}

Dataset read_dataset(std::istream& in, const std::string& source) {
  std::string line;
  int line_no = 0;
  auto next_header = [&](const std::string& key) {
    ++line_no;
    if (!std::getline(in, line)) throw ParseError(source, line_no, "missing '" + key + "' header");
    std::istringstream ls(line);
    std::string k, v;
    ls >> k >> v;
    if (k != key || v.empty()) throw ParseError(source, line_no, "expected '" + key + " <value>'");
    return v;
  };

  const std::string version = next_header("sgt-dataset");
  if (version != std::to_string(kDatasetVersion))
    throw ParseError(source, line_no, "unsupported dataset version " + version);
  Dataset ds;
  const std::string start = next_header("start");
  const auto start_sq = chess::parse_square(start);
  if (!start_sq) throw ParseError(source, line_no, "bad start square '" + start + "'");
  ds.start = *start_sq;
  const std::string seed = next_header("seed");
  try {
    std::size_t used = 0;
    ds.seed = std::stoull(seed, &used);
    if (used != seed.size()) throw std::invalid_argument(seed);
  } catch (const std::exception&) {
    throw ParseError(source, line_no, "bad seed '" + seed + "'");
  }

  std::vector<Task> tasks;
  try {
    tasks = chess::enumerate_tasks(ds.start);
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, 2, e.what());
  }
  ds.entries.resize(tasks.size());
  std::vector<bool> seen(tasks.size(), false);

  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = split(t, '|');
    if (fields.size() != 4)
      throw ParseError(source, line_no, "expected 4 '|'-separated fields, got " + std::to_string(fields.size()));
    int id = -1;
    try {
      std::size_t used = 0;
      id = std::stoi(fields[0], &used);
      if (used != fields[0].size()) id = -1;
    } catch (const std::exception&) {
      id = -1;
    }
    if (id < 0 || id >= static_cast<int>(tasks.size()))
      throw ParseError(source, line_no, "bad task id '" + fields[0] + "'");
    if (seen[static_cast<std::size_t>(id)]) throw ParseError(source, line_no, "duplicate task id " + fields[0]);
    seen[static_cast<std::size_t>(id)] = true;

    DatasetEntry& e = ds.entries[static_cast<std::size_t>(id)];
    e.task = tasks[static_cast<std::size_t>(id)];
    if (fields[1] == "train") {
      e.split = Split::Train;
      ds.train_ids.push_back(id);
    } else if (fields[1] == "test") {
      e.split = Split::Test;
      ds.test_ids.push_back(id);
    } else {
      throw ParseError(source, line_no, "bad split '" + fields[1] + "'");
    }
    e.expert = parse_sequence(fields[2], "expert", source, line_no);
    e.learner = parse_sequence(fields[3], "learner", source, line_no);
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw ParseError(source, line_no, "task " + std::to_string(i) + " missing from dataset");
  std::sort(ds.train_ids.begin(), ds.train_ids.end());
  std::sort(ds.test_ids.begin(), ds.test_ids.end());
  return ds;
}

void write_tasks(std::ostream& out, const std::vector<Task>& tasks) {
  for (const Task& t : tasks)
    out << t.id << ',' << t.start.name() << ',' << t.pawn_a.name() << ',' << t.pawn_b.name() << '\n';
}

std::vector<Task> read_tasks(std::istream& in, const std::string& source) {
  std::vector<Task> tasks;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = split(t, ',');
    if (fields.size() != 4) throw ParseError(source, line_no, "expected id,start,pawn_a,pawn_b");
    Task task;
    try {
      task.id = std::stoi(fields[0]);
      task.start = chess::square(fields[1]);
      task.pawn_a = chess::square(fields[2]);
      task.pawn_b = chess::square(fields[3]);
      task.validate();
    } catch (const std::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
    tasks.push_back(task);
  }
  return tasks;
}

}  // namespace sgt::oracle
