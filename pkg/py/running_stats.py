#
# Licensed under the BSD license.  See full license in LICENSE file.
#

"""Compute a running mean and standard deviation

Receives one numpy array per Monte Carlo trial (a per-step record of that
trial) and keeps the running mean and variance of every element, so an
ensemble never has to hold all of its trials in memory.

derived from the work of John D. Cook
http://www.johndcook.com/blog/standard_deviation/

Third party dependencies:

numpy: for array arithmetic
    http://www.numpy.org/
"""
import numpy


class Stats(object):
    def __init__(self, shape):
        """Constructor

        :param shape: the shape of every pushed sample
        :type shape: int | tuple
        """
        self.shape = shape
        self.empty = numpy.zeros(shape, dtype='float64')
        self.clear()

    def clear(self):
        self.sample_count = 0
        self.mean_ = self.empty.copy()
        self.sum_sq_ = self.empty.copy()

    def push(self, data):
        """Add a new sample to the running standard deviation and mean

        Samples are folded in the order pushed; pushing the same samples in
        the same order always gives bit-identical results.

        :param data: new sample data, same shape as the constructor shape
        :type data: numpy array
        """
        data = numpy.asarray(data, dtype='float64')
        if data.shape != self.empty.shape:
            raise ValueError('sample shape %r does not match %r'
                             % (data.shape, self.empty.shape))

        self.sample_count += 1
        delta = data - self.mean_
        self.mean_ = self.mean_ + delta / self.sample_count
        self.sum_sq_ = self.sum_sq_ + delta * (data - self.mean_)

    def num_data_values(self):
        """Get the current number of observations in the sample

        :return: current samples observed
        :rtype: int
        """
        return self.sample_count

    def mean(self):
        """Get the current mean

        :return: current sampled mean
        :rtype: numpy array
        """
        return self.mean_.copy()

    def variance(self):
        """Get the current (unbiased) variance

        :return: current variance
        :rtype: numpy array
        """
        if self.sample_count > 1:
            return self.sum_sq_ / (self.sample_count - 1.0)
        else:
            return self.empty.copy()

    def std(self):
        """Get the current standard deviation

        :return: current standard deviation
        :rtype: numpy array
        """
        return numpy.sqrt(self.variance())

    def std_error(self):
        """Standard error of the mean, std / sqrt(n)

        :return: zero until two samples have been pushed
        :rtype: numpy array
        """
        if self.sample_count > 1:
            return self.std() / numpy.sqrt(self.sample_count)
        else:
            return self.empty.copy()
