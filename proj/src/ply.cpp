#include "priorsplat/ply.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace priorsplat::ply {

namespace {

std::optional<Type> parse_type(const std::string& s) {
  if (s == "char" || s == "int8") return Type::Int8;
  if (s == "uchar" || s == "uint8") return Type::UInt8;
  if (s == "short" || s == "int16") return Type::Int16;
  if (s == "ushort" || s == "uint16") return Type::UInt16;
  if (s == "int" || s == "int32") return Type::Int32;
  if (s == "uint" || s == "uint32") return Type::UInt32;
  if (s == "float" || s == "float32") return Type::Float32;
  if (s == "double" || s == "float64") return Type::Float64;
  return std::nullopt;
}

bool is_integer(Type t) { return t != Type::Float32 && t != Type::Float64; }

template <typename T>
T load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double decode(Type t, const char* p) {
  switch (t) {
    case Type::Int8: return load<int8_t>(p);
    case Type::UInt8: return load<uint8_t>(p);
    case Type::Int16: return load<int16_t>(p);
    case Type::UInt16: return load<uint16_t>(p);
    case Type::Int32: return load<int32_t>(p);
    case Type::UInt32: return load<uint32_t>(p);
    case Type::Float32: return load<float>(p);
    case Type::Float64: return load<double>(p);
  }
  return 0;
}

template <typename T>
void store(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void encode(Type t, double v, std::string& out) {
  switch (t) {
    case Type::Int8: store<int8_t>(out, static_cast<int8_t>(v)); break;
    case Type::UInt8: store<uint8_t>(out, static_cast<uint8_t>(v)); break;
    case Type::Int16: store<int16_t>(out, static_cast<int16_t>(v)); break;
    case Type::UInt16: store<uint16_t>(out, static_cast<uint16_t>(v)); break;
    case Type::Int32: store<int32_t>(out, static_cast<int32_t>(v)); break;
    case Type::UInt32: store<uint32_t>(out, static_cast<uint32_t>(v)); break;
    case Type::Float32: store<float>(out, static_cast<float>(v)); break;
    case Type::Float64: store<double>(out, v); break;
  }
}

}  // namespace

size_t type_size(Type t) {
  switch (t) {
    case Type::Int8:
    case Type::UInt8: return 1;
    case Type::Int16:
    case Type::UInt16: return 2;
    case Type::Int32:
    case Type::UInt32:
    case Type::Float32: return 4;
    case Type::Float64: return 8;
  }
  return 0;
}

const char* type_name(Type t) {
  switch (t) {
    case Type::Int8: return "char";
    case Type::UInt8: return "uchar";
    case Type::Int16: return "short";
    case Type::UInt16: return "ushort";
    case Type::Int32: return "int";
    case Type::UInt32: return "uint";
    case Type::Float32: return "float";
    case Type::Float64: return "double";
  }
  return "?";
}

const std::vector<double>& Element::column(const std::string& prop) const {
  auto it = scalars.find(prop);
  if (it == scalars.end()) {
    throw ParseError("ply element '" + name + "' has no property '" + prop + "'");
  }
  return it->second;
}

const Element* File::find(const std::string& name) const {
  for (const auto& e : elements) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

Element& File::add(const std::string& name, size_t count) {
  elements.push_back(Element{name, count, {}, {}, {}});
  return elements.back();
}

File parse(const std::string& bytes, const std::string& source) {
  auto fail = [&](size_t offset, const std::string& msg) -> ParseError {
    return ParseError(source + ": " + msg + " (byte offset " + std::to_string(offset) + ")");
  };

  File file;
  size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw fail(pos, "unterminated ply header");
    std::string line = bytes.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = nl + 1;
    return line;
  };

  if (next_line() != "ply") throw fail(0, "missing 'ply' magic");
  bool have_format = false;
  while (true) {
    const size_t line_start = pos;
    const std::string line = next_line();
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (key.empty()) continue;
    if (key == "end_header") break;
    if (key == "format") {
      std::string fmt, ver;
      is >> fmt >> ver;
      if (fmt != "binary_little_endian") {
        throw fail(line_start, "unsupported ply format '" + fmt + "'");
      }
      have_format = true;
    } else if (key == "comment" || key == "obj_info") {
      const size_t sp = line.find(' ');
      file.comments.push_back(sp == std::string::npos ? "" : line.substr(sp + 1));
    } else if (key == "element") {
      std::string name;
      long long count = -1;
      is >> name >> count;
      if (!is || count < 0) throw fail(line_start, "malformed element line");
      file.add(name, static_cast<size_t>(count));
    } else if (key == "property") {
      if (file.elements.empty()) throw fail(line_start, "property before element");
      std::string t1;
      is >> t1;
      Property prop;
      if (t1 == "list") {
        std::string ct, it;
        is >> ct >> it >> prop.name;
        auto c = parse_type(ct);
        auto i = parse_type(it);
        if (!c || !i || !is_integer(*c) || !is_integer(*i)) {
          throw fail(line_start, "unsupported list property types");
        }
        prop.is_list = true;
        prop.count_type = *c;
        prop.type = *i;
      } else {
        is >> prop.name;
        auto t = parse_type(t1);
        if (!t) throw fail(line_start, "unknown property type '" + t1 + "'");
        prop.type = *t;
      }
      if (prop.name.empty()) throw fail(line_start, "property without name");
      file.elements.back().properties.push_back(prop);
    } else {
      throw fail(line_start, "unknown header keyword '" + key + "'");
    }
  }
  if (!have_format) throw fail(pos, "missing format line");

  for (auto& el : file.elements) {
    for (const auto& p : el.properties) {
      if (p.is_list) {
        el.lists[p.name].reserve(el.count);
      } else {
        el.scalars[p.name].reserve(el.count);
      }
    }
    for (size_t row = 0; row < el.count; ++row) {
      for (const auto& p : el.properties) {
        if (p.is_list) {
          const size_t cs = type_size(p.count_type);
          if (pos + cs > bytes.size()) {
            throw fail(pos, "truncated data in element '" + el.name + "' row " + std::to_string(row));
          }
          const double n = decode(p.count_type, bytes.data() + pos);
          pos += cs;
          if (n < 0) throw fail(pos, "negative list length");
          const size_t is = type_size(p.type);
          const size_t len = static_cast<size_t>(n);
          if (pos + len * is > bytes.size()) {
            throw fail(pos, "truncated data in element '" + el.name + "' row " + std::to_string(row));
          }
          std::vector<int64_t> items(len);
          for (size_t k = 0; k < len; ++k) {
            items[k] = static_cast<int64_t>(decode(p.type, bytes.data() + pos));
            pos += is;
          }
          el.lists[p.name].push_back(std::move(items));
        } else {
          const size_t s = type_size(p.type);
          if (pos + s > bytes.size()) {
            throw fail(pos, "truncated data in element '" + el.name + "' row " + std::to_string(row));
          }
          el.scalars[p.name].push_back(decode(p.type, bytes.data() + pos));
          pos += s;
        }
      }
    }
  }
  return file;
}

File read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void write(const std::filesystem::path& path, const File& file) {
  std::string out;
  out += "ply\nformat binary_little_endian 1.0\n";
  for (const auto& c : file.comments) out += "comment " + c + "\n";
  for (const auto& el : file.elements) {
    out += "element " + el.name + " " + std::to_string(el.count) + "\n";
    for (const auto& p : el.properties) {
      if (p.is_list) {
        out += std::string("property list ") + type_name(p.count_type) + " " + type_name(p.type) +
               " " + p.name + "\n";
      } else {
        out += std::string("property ") + type_name(p.type) + " " + p.name + "\n";
      }
    }
  }
  out += "end_header\n";
  for (const auto& el : file.elements) {
    std::vector<const std::vector<double>*> cols;
    std::vector<const std::vector<std::vector<int64_t>>*> lists;
    for (const auto& p : el.properties) {
      if (p.is_list) {
        auto it = el.lists.find(p.name);
        if (it == el.lists.end() || it->second.size() != el.count) {
          throw Error("ply write: list '" + p.name + "' missing or wrong length");
        }
        lists.push_back(&it->second);
        cols.push_back(nullptr);
      } else {
        auto it = el.scalars.find(p.name);
        if (it == el.scalars.end() || it->second.size() != el.count) {
          throw Error("ply write: column '" + p.name + "' missing or wrong length");
        }
        cols.push_back(&it->second);
        lists.push_back(nullptr);
      }
    }
    for (size_t row = 0; row < el.count; ++row) {
      for (size_t k = 0; k < el.properties.size(); ++k) {
        const auto& p = el.properties[k];
        if (p.is_list) {
          const auto& items = (*lists[k])[row];
          encode(p.count_type, static_cast<double>(items.size()), out);
          for (int64_t v : items) encode(p.type, static_cast<double>(v), out);
        } else {
          encode(p.type, (*cols[k])[row], out);
        }
      }
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw Error("write failed: " + path.string());
}

}  // namespace priorsplat::ply
