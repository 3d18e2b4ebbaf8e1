#pragma once

#include <string>
#include <string_view>

namespace ctxprompt {

// Porter (1980) suffix-stripping stemmer, original rule set. Input is expected
// lowercase; words of one or two letters are returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace ctxprompt
