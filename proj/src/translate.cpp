#include "gpxharvest/translate.hpp"

#include "gpxharvest/lang.hpp"
#include "gpxharvest/util.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <csignal>
#include <cerrno>
#include <cstring>
#include <thread>
#include <unordered_map>

extern char** environ;

namespace gpxharvest::desc {

namespace {

std::string shell_quote(std::string_view s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out.push_back(c);
        }
    }
    out += "'";
    return out;
}

// Runs /bin/sh -c command, feeding `input` on stdin.
std::pair<int, std::string> run_shell(const std::string& command, std::string_view input) {
    int in_pipe[2], out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0) throw TranslationError(std::string("pipe: ") + std::strerror(errno));
    if (pipe2(out_pipe, O_CLOEXEC) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw TranslationError(std::string("pipe: ") + std::strerror(errno));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
    posix_spawn_file_actions_addclose(&actions, out_pipe[0]);

    const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
    pid_t pid = 0;
    int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(in_pipe[0]);
    close(out_pipe[1]);
    if (rc != 0) {
        close(in_pipe[1]);
        close(out_pipe[0]);
        throw TranslationError(std::string("spawn failed: ") + std::strerror(rc));
    }

    // Stdin is fed from a separate thread so large inputs cannot deadlock
    // against a full stdout pipe. SIGPIPE is blocked there so a child that
    // ignores stdin yields EPIPE instead of killing the process.
    std::thread writer([fd = in_pipe[1], input] {
        sigset_t pipe_set;
        sigemptyset(&pipe_set);
        sigaddset(&pipe_set, SIGPIPE);
        pthread_sigmask(SIG_BLOCK, &pipe_set, nullptr);
        std::size_t written = 0;
        bool broken = false;
        while (written < input.size()) {
            auto n = write(fd, input.data() + written, input.size() - written);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                broken = errno == EPIPE;
                break;
            }
            written += static_cast<std::size_t>(n);
        }
        close(fd);
        if (broken) {
            timespec zero{};
            sigtimedwait(&pipe_set, nullptr, &zero);
        }
    });

    std::string output;
    char buf[4096];
    while (true) {
        auto n = read(out_pipe[0], buf, sizeof(buf));
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        output.append(buf, static_cast<std::size_t>(n));
    }
    close(out_pipe[0]);
    writer.join();

    int status = 0;
    waitpid(pid, &status, 0);
    int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128;
    return {exit_code, std::move(output)};
}

}  // namespace

CommandTranslator::CommandTranslator(std::string command_template, int max_in_flight)
    : template_(std::move(command_template)), in_flight_(std::clamp(max_in_flight, 1, 64)) {
    if (template_.empty()) throw std::invalid_argument("translator command is empty");
}

std::string CommandTranslator::translate(std::string_view text, std::string_view source_lang) {
    std::string command = template_;
    for (auto pos = command.find("{src}"); pos != std::string::npos; pos = command.find("{src}", pos)) {
        auto quoted = shell_quote(source_lang);
        command.replace(pos, 5, quoted);
        pos += quoted.size();
    }
    in_flight_.acquire();
    std::pair<int, std::string> result_pair;
    try {
        result_pair = run_shell(command, text);
    } catch (...) {
        in_flight_.release();
        throw;
    }
    in_flight_.release();
    auto& [code, out] = result_pair;
    if (code != 0) throw TranslationError("translator exited with status " + std::to_string(code));
    auto result = std::string(trim(out));
    if (result.empty()) throw TranslationError("translator produced no output");
    return result;
}

ScriptedTranslator ScriptedTranslator::from_json(const nlohmann::json& j) {
    ScriptedTranslator t(j.value("passthrough", true));
    const auto translations = j.value("translations", nlohmann::json::object());
    for (const auto& [src, en] : translations.items()) {
        t.add(src, en.get<std::string>());
    }
    return t;
}

ScriptedTranslator& ScriptedTranslator::add(std::string source, std::string english) {
    table_.insert_or_assign(std::move(source), std::move(english));
    return *this;
}

std::string ScriptedTranslator::translate(std::string_view text, std::string_view) {
    if (auto it = table_.find(text); it != table_.end()) return it->second;
    if (passthrough_) return std::string(text);
    throw TranslationError("no scripted translation");
}

std::string translate_to_english(std::string_view text, std::string_view lang, Translator& translator) {
    if (lang == kUnknownLanguage) throw std::invalid_argument("cannot translate text of unknown language");
    if (lang == "en") return std::string(text);
    return translator.translate(text, lang);
}

std::vector<bool> rare_language_mask(std::span<const std::string> langs, std::size_t cutoff) {
    std::unordered_map<std::string_view, std::size_t> counts;
    for (const auto& l : langs) ++counts[l];
    std::vector<bool> keep(langs.size());
    for (std::size_t i = 0; i < langs.size(); ++i) {
        keep[i] = langs[i] != kUnknownLanguage && counts[langs[i]] > cutoff;
    }
    return keep;
}

}  // namespace gpxharvest::desc
