#include "sgt/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace sgt::nn {

namespace {

void put_le_double(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffU);
  out.write(bytes, 8);
}

double get_le_double(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (in.gcount() != 8) throw CheckpointError("checkpoint truncated in data section");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

const std::string* Checkpoint::find_meta(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return &v;
  return nullptr;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << "SGTCKPT " << kCheckpointVersion << '\n';
  for (const auto& [k, v] : ckpt.meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos)
      throw CheckpointError("checkpoint meta entries must be single-line, key without spaces");
    out << "meta " << k << ' ' << v << '\n';
  }
  for (const auto& t : ckpt.tensors)
    out << "tensor " << t.name << ' ' << t.value.rows() << ' ' << t.value.cols() << '\n';
  out << "data\n";
  for (const auto& t : ckpt.tensors)
    for (double v : t.value.values()) put_le_double(out, v);
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CheckpointError("empty checkpoint");
  {
    std::istringstream hs(line);
    std::string magic;
    int version = 0;
    hs >> magic >> version;
    if (magic != "SGTCKPT") throw CheckpointError("not a checkpoint file (bad magic)");
    if (version != kCheckpointVersion)
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  while (true) {
    if (!std::getline(in, line)) throw CheckpointError("checkpoint header not terminated");
    if (line == "data") break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta.emplace_back(key, value);
    } else if (kind == "tensor") {
      std::string name;
      std::size_t rows = 0, cols = 0;
      if (!(ls >> name >> rows >> cols) || rows == 0 || cols == 0)
        throw CheckpointError("bad tensor manifest line: " + line);
      ckpt.tensors.push_back({name, Matrix(rows, cols)});
    } else {
      throw CheckpointError("unknown checkpoint header line: " + line);
    }
  }
  for (auto& t : ckpt.tensors)
    for (double& v : t.value.values()) v = get_le_double(in);
  if (in.peek() != std::char_traits<char>::eof())
    throw CheckpointError("trailing bytes after checkpoint data");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open for writing: " + path.string());
  write_checkpoint(out, ckpt);
  if (!out) throw CheckpointError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open for reading: " + path.string());
  return read_checkpoint(in);
}

Checkpoint snapshot(std::span<Param* const> params) {
  Checkpoint ckpt;
  for (const Param* p : params) ckpt.tensors.push_back({p->name, p->value});
  return ckpt;
}

void restore(const Checkpoint& ckpt, std::span<Param* const> params) {
  if (ckpt.tensors.size() != params.size())
    throw CheckpointError("checkpoint has " + std::to_string(ckpt.tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = ckpt.tensors[i];
    if (t.name != params[i]->name || !t.value.same_shape(params[i]->value))
      throw CheckpointError("checkpoint tensor " + t.name + " does not match model tensor " +
                            params[i]->name);
    params[i]->value = t.value;
  }
}

}  // namespace sgt::nn
