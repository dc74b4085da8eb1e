"""Objects used for error reporting.

The command-line entry point collects issues in the global error_collector
and prints them for the user once a command finishes.

"""


class ErrorCollector:
    """Class that accumulates all errors and warnings encountered.

    We create a global instance of this class so every module can add
    diagnostics to it without threading a reporter through pure functions.
    Worker processes of a batch run each get their own instance, so anything
    that must survive a run is also written to the trace.

    """

    def __init__(self):
        """Initialize the ErrorCollector with no issues to report."""
        self.issues = []

    def add(self, issue):
        """Add the given error or warning (SimError) to list of errors."""
        self.issues.append(issue)
        self.issues.sort()

    def ok(self):
        """Return True iff there are no errors."""
        return not any(not issue.warning for issue in self.issues)

    def warnings(self):
        """Return the descriptions of all warnings collected so far."""
        return [issue.descrip for issue in self.issues if issue.warning]

    def show(self, warnings=True):  # pragma: no cover
        """Display all errors, and warnings unless told otherwise."""
        for issue in self.issues:
            if warnings or not issue.warning:
                print(issue)

    def clear(self):
        """Clear all warnings and errors. Intended only for testing use."""
        self.issues = []


error_collector = ErrorCollector()


class Location:
    """Class representing a line in a scenario or trace file.

    file (str) - Name of the file in which this location is.
    line (int) - Line number in file, starting from 1.
    full_line (str) - Full text of the line.
    """

    def __init__(self, file, line, full_line=""):
        """Initialize Location object."""
        self.file = file
        self.line = line
        self.full_line = full_line


class SimError(Exception):
    """Class representing simulator errors.

    descrip (str) - User-friendly explanation of the error. Should begin
    with a lowercase letter.
    location (Location) - Where in an input file the problem is, if known.
    warning (bool) - True if this is a warning.

    """

    def __init__(self, descrip, location=None, warning=False):
        """Initialize error."""
        super().__init__(descrip)
        self.descrip = descrip
        self.location = location
        self.warning = warning

    def __str__(self):  # pragma: no cover
        """Return a pretty-printable statement of the error."""
        error_color = "\x1B[31m"
        warn_color = "\x1B[33m"
        reset_color = "\x1B[0m"
        bold_color = "\033[1m"

        color_code = warn_color if self.warning else error_color
        issue_type = "warning" if self.warning else "error"

        if self.location:
            text = (f"{bold_color}{self.location.file}:"
                    f"{self.location.line}: "
                    f"{color_code}{issue_type}:{reset_color} {self.descrip}")
            if self.location.full_line:
                text += f"\n  {self.location.full_line.strip()}"
            return text
        else:
            return (f"{bold_color}terra: {color_code}{issue_type}:"
                    f"{reset_color} {self.descrip}")

    def __lt__(self, other):
        """Provides sort order for printing errors."""

        # everything without a location comes before everything with one
        if not self.location:
            return bool(other.location)
        if not other.location:
            return False

        # no opinion between errors in different files
        if self.location.file != other.location.file:
            return False

        return self.location.line < other.location.line


class ConfigError(SimError):
    """A scenario, codebook or schedule that cannot be simulated."""

    pass


class DomainError(SimError):
    """A pure function called outside of its domain (e.g. negative range)."""

    pass
