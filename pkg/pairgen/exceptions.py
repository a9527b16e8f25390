# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.


class PairgenError(Exception):
    pass


class ConfigError(PairgenError):
    pass


class DataError(PairgenError):
    pass


class ShapeError(PairgenError, ValueError):
    pass


class NumericalError(PairgenError):
    """A non-finite value showed up where training or a metric needs a real number.

    ``diagnostics`` carries whatever the raising code knew at the time
    (loss terms, eigenvalues, ...) so the caller can dump it.
    """

    def __init__(self, message, diagnostics=None):
        super(NumericalError, self).__init__(message)
        self.diagnostics = diagnostics or {}
