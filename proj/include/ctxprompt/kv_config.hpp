#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ctxprompt {

// Key-value configuration text:
//   # comment
//   key = value
//   [section name]
// Keys before the first section belong to the unnamed base section. Values are
// taken verbatim after trimming; there is no quoting or escaping.
struct KvEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

struct KvSection {
  std::string name;
  std::vector<KvEntry> entries;
};

struct KvDocument {
  KvSection base;
  std::vector<KvSection> sections;
};

KvDocument parse_kv(const std::string& text, const std::string& source = "<config>");
KvDocument load_kv(const std::filesystem::path& path);

}  // namespace ctxprompt
