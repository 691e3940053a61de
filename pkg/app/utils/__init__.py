# логирование и потоки случайных чисел
