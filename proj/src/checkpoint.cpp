#include "deepalloc/checkpoint.hpp"

#include <fmt/format.h>

#include <charconv>
#include <sstream>

#include "deepalloc/errors.hpp"
#include "deepalloc/io.hpp"

namespace deepalloc {

namespace {

constexpr std::string_view kMagic = "deepalloc-tensors";

DataError corrupt(const std::string& what) {
  return DataError(DataError::Kind::kParse, "checkpoint: " + what);
}

std::size_t parse_size(std::string_view s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw corrupt(fmt::format("bad integer '{}'", s));
  }
  return v;
}

}  // namespace

const tensor::Tensor& TensorContainer::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError(DataError::Kind::kParse, fmt::format("checkpoint has no tensor '{}'", name));
}

std::string serialize(const TensorContainer& c) {
  std::string out = fmt::format("{} {}\n", kMagic, kContainerVersion);
  for (const auto& [k, v] : c.meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw UsageError(fmt::format("checkpoint meta key '{}' must be a single token", k));
    }
    out += fmt::format("meta {} {}\n", k, v);
  }
  for (const auto& [name, t] : c.tensors) {
    out += fmt::format("tensor {} {}", name, t.rank());
    for (auto d : t.shape()) out += fmt::format(" {}", d);
    out += '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i > 0) out += ' ';
      out += io::format_number(t[i]);
    }
    out += '\n';
  }
  out += "end\n";
  return out;
}

TensorContainer deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw corrupt("empty file");
  const auto head = io::split(line, ' ');
  if (head.size() != 2 || head[0] != kMagic) throw corrupt("missing header");
  if (parse_size(head[1]) != static_cast<std::size_t>(kContainerVersion)) {
    throw corrupt(fmt::format("unsupported version {}", head[1]));
  }
  TensorContainer c;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    if (line.rfind("meta ", 0) == 0) {
      const auto rest = line.substr(5);
      const auto sp = rest.find(' ');
      if (sp == std::string::npos) throw corrupt("malformed meta line");
      c.meta[rest.substr(0, sp)] = rest.substr(sp + 1);
      continue;
    }
    if (line.rfind("tensor ", 0) == 0) {
      const auto parts = io::split(line, ' ');
      if (parts.size() < 3) throw corrupt("malformed tensor line");
      const std::size_t rank = parse_size(parts[2]);
      if (parts.size() != 3 + rank) throw corrupt(fmt::format("tensor '{}' rank mismatch", parts[1]));
      tensor::Shape shape;
      for (std::size_t i = 0; i < rank; ++i) shape.push_back(parse_size(parts[3 + i]));
      std::string values;
      if (!std::getline(in, values)) throw corrupt(fmt::format("tensor '{}' has no data", parts[1]));
      std::vector<double> data;
      if (!values.empty()) {
        for (const auto& cell : io::split(values, ' ')) data.push_back(io::parse_double(cell));
      }
      if (data.size() != tensor::element_count(shape)) {
        throw corrupt(fmt::format("tensor '{}' expects {} values, found {}", parts[1],
                                  tensor::element_count(shape), data.size()));
      }
      c.tensors.emplace_back(parts[1], tensor::Tensor(std::move(shape), std::move(data)));
      continue;
    }
    throw corrupt(fmt::format("unexpected line '{}'", line.substr(0, 40)));
  }
  if (!ended) throw corrupt("truncated (no end marker)");
  return c;
}

void save_container(const TensorContainer& c, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize(c));
}

TensorContainer load_container(const std::filesystem::path& path) {
  return deserialize(io::read_file(path));
}

}  // namespace deepalloc
