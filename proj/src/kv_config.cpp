#include "ctxprompt/kv_config.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "ctxprompt/error.hpp"
#include "ctxprompt/text.hpp"

namespace ctxprompt {

KvDocument parse_kv(const std::string& content, const std::string& source) {
  KvDocument doc;
  KvSection* current = &doc.base;
  std::istringstream in(content);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(source, line_no, "unterminated section header");
      doc.sections.push_back({text::trim(line.substr(1, line.size() - 2)), {}});
      current = &doc.sections.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected key = value");
    KvEntry e{text::trim(line.substr(0, eq)), text::trim(line.substr(eq + 1)), line_no};
    if (e.key.empty()) throw ParseError(source, line_no, "empty key");
    current->entries.push_back(std::move(e));
  }
  return doc;
}

KvDocument load_kv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_kv(content, path.string());
}

}  // namespace ctxprompt
