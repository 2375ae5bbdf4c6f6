#include "arml/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <string_view>

namespace arml {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char *env = std::getenv("ARML_THREADS")) {
        std::string_view text(env);
        int value = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec == std::errc() && ptr == text.data() + text.size() && value > 0) return value;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace arml
