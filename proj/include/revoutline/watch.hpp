#pragma once

// Re-outlines a file whenever its modification time or size changes, reporting
// only the cards whose paragraphs are new since the previous pass.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "revoutline/docstate.hpp"
#include "revoutline/errors.hpp"

namespace revoutline {

struct WatchUpdate {
    bool reloaded = false;
    EditDiff diff;
    std::vector<std::pair<std::size_t, Card>> cards; // changed cards by paragraph index
    std::size_t computations = 0;                    // summarizer invocations in this pass
};

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

class OutlineWatcher {
public:
    OutlineWatcher(std::filesystem::path path, SummaryLevel level, AnnotationEngine& engine,
                   const AbbreviationList& abbreviations = AbbreviationList::builtin())
        : path_(std::move(path)), level_(level), engine_(engine), session_("watch", abbreviations) {}

    const DocumentSession& session() const noexcept { return session_; }

    // Reloads when the file looks different from the last pass (always on the first call).
    WatchUpdate poll() {
        std::error_code ec;
        const auto mtime = std::filesystem::last_write_time(path_, ec);
        if (ec) throw LoadError("cannot stat " + path_.string() + ": " + ec.message());
        const auto size = std::filesystem::file_size(path_, ec);
        if (ec) throw LoadError("cannot stat " + path_.string() + ": " + ec.message());
        if (stamp_ && stamp_->first == mtime && stamp_->second == size) return {};
        stamp_ = std::make_pair(mtime, size);
        return refresh();
    }

    WatchUpdate refresh() {
        const bool first = !loaded_;
        loaded_ = true;
        WatchUpdate update;
        update.reloaded = true;
        update.diff = session_.apply_edit(read_text_file(path_));

        const auto before = engine_.computations();
        auto cards = annotate_document(engine_, session_, level_);
        update.computations = engine_.computations() - before;

        if (first) {
            for (std::size_t i = 0; i < cards.size(); ++i) update.cards.emplace_back(i, std::move(cards[i]));
        } else {
            for (std::size_t i : update.diff.changed) update.cards.emplace_back(i, std::move(cards[i]));
        }
        return update;
    }

private:
    std::filesystem::path path_;
    SummaryLevel level_;
    AnnotationEngine& engine_;
    DocumentSession session_;
    bool loaded_ = false;
    std::optional<std::pair<std::filesystem::file_time_type, std::uintmax_t>> stamp_;
};

} // namespace revoutline
