#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "priorsplat/common.hpp"

namespace priorsplat::ply {

enum class Type { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

size_t type_size(Type t);
const char* type_name(Type t);

struct Property {
  std::string name;
  Type type = Type::Float32;
  bool is_list = false;
  Type count_type = Type::UInt8;
};

struct Element {
  std::string name;
  size_t count = 0;
  std::vector<Property> properties;

  // Decoded values. Scalars land in `scalars[name]` (one entry per element
  // row); list properties land in `lists[name]`.
  std::map<std::string, std::vector<double>> scalars;
  std::map<std::string, std::vector<std::vector<int64_t>>> lists;

  bool has(const std::string& prop) const { return scalars.count(prop) > 0; }
  const std::vector<double>& column(const std::string& prop) const;
};

struct File {
  std::vector<std::string> comments;
  std::vector<Element> elements;

  const Element* find(const std::string& name) const;
  Element& add(const std::string& name, size_t count);
};

// Only binary_little_endian is accepted. Errors carry the byte offset.
File read(const std::filesystem::path& path);
File parse(const std::string& bytes, const std::string& source_name);

// Writes every element in declaration order. Scalar values are converted to
// the declared property type; list properties must use an integer item type.
void write(const std::filesystem::path& path, const File& file);

}  // namespace priorsplat::ply
