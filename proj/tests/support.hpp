#pragma once
// Shared helpers for the test programs.

#include "gazesearch/types.hpp"

#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testing_support {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("gazesearch_" + tag + "_" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

inline fs::path fixtures() { return GAZESEARCH_FIXTURES; }

inline std::vector<gazesearch::Fixation> random_fixations(std::mt19937_64& rng, int n, double w,
                                                          double h) {
    std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h), ud(0.05, 1.0);
    std::vector<gazesearch::Fixation> out;
    for (int i = 0; i < n; ++i) out.push_back({ux(rng), uy(rng), ud(rng)});
    return out;
}

// Trimmed cells of every markdown table row whose first cell is `name`.
inline std::vector<std::string> table_row(const std::string& table, const std::string& name) {
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(' ');
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(' ') - b + 1);
    };
    std::istringstream lines(table);
    std::string line;
    while (std::getline(lines, line)) {
        std::vector<std::string> cells;
        std::istringstream parts(line);
        std::string part;
        std::getline(parts, part, '|');
        while (std::getline(parts, part, '|')) cells.push_back(trim(part));
        if (!cells.empty() && cells.front() == name) {
            cells.erase(cells.begin());
            return cells;
        }
    }
    return {};
}

}  // namespace testing_support
