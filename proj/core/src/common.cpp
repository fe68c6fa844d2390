#include "feedmesh/common.hpp"

namespace feedmesh {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start <= text.size()) {
        size_t pos = text.find(sep, start);
        if (pos == std::string::npos) {
            std::string piece = trim(text.substr(start));
            if (!piece.empty()) out.push_back(piece);
            break;
        }
        std::string piece = trim(text.substr(start, pos - start));
        if (!piece.empty()) out.push_back(piece);
        start = pos + 1;
    }
    return out;
}

}  // namespace feedmesh
